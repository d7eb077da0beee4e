import os
from typing import Sequence

import pandas as pd
import structlog

from physmorph.types import PhysMorphModel

log = structlog.get_logger(__name__)


def append_rows(path: str, rows: Sequence[PhysMorphModel]) -> None:
    """Append rows to a CSV file, writing the header when the file is new."""
    if not rows:
        return
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    frame = pd.DataFrame([row.flat_dict() for row in rows])
    exists = os.path.isfile(path)
    frame.to_csv(path, mode="a" if exists else "w", header=not exists, index=False)
    log.debug("Rows appended.", path=path, rows=len(rows))


def read_rows(path: str) -> pd.DataFrame:
    return pd.read_csv(path)
