import numpy as np
import torch


def assert_finite(name: str, value) -> None:
    """Raise a ValueError naming `name` if `value` holds NaN or infinite entries."""
    if isinstance(value, torch.Tensor):
        finite = bool(torch.isfinite(value).all())
    else:
        finite = bool(np.isfinite(np.asarray(value)).all())
    if not finite:
        raise ValueError(f"{name} contains non-finite entries.")
