from typing import Any, Dict

import numpy as np
import orjson
import torch
from pydantic import BaseModel, Extra

from physmorph.utils.conversion import orjson_dumps


def _orjson_dumps_str(v, *, default=None) -> str:
    return orjson_dumps(v, default=default).decode()


class PhysMorphModel(BaseModel):
    """Base for every value type of the package.

    Numpy arrays and torch tensors are allowed as fields; they serialize as nested lists.
    """

    def flat_dict(self, **kwargs: Any) -> Dict[str, Any]:
        """Dict with array-valued fields converted to lists, ready for orjson or pandas."""
        return {
            key: (value.tolist() if isinstance(value, (np.ndarray, torch.Tensor)) else value)
            for key, value in self.dict(**kwargs).items()
        }

    class Config:
        arbitrary_types_allowed = True
        copy_on_model_validation = "none"
        extra = Extra.forbid
        json_encoders = {
            np.ndarray: lambda x: x.tolist(),
            torch.Tensor: lambda x: x.detach().cpu().tolist(),
        }
        json_loads = orjson.loads
        json_dumps = _orjson_dumps_str
