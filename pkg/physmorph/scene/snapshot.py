"""PMGS particle snapshots.

Layout: magic b"PMGS", version (u32), particle count (u64), then for every particle 25
little-endian float64 values: x[3], v[3], C[9], F[9], mass.
"""
import os

import numpy as np
import torch

from physmorph.types import ParticleState

SNAPSHOT_MAGIC = b"PMGS"
SNAPSHOT_VERSION = 1
VALUES_PER_PARTICLE = 25

_HEADER = np.dtype([("magic", "S4"), ("version", "<u4"), ("count", "<u8")])
_VALUE = np.dtype("<f8")


class SnapshotFormatError(ValueError):
    pass


def export_snapshot(state: ParticleState, path: str) -> None:
    n = state.count
    header = np.array([(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, n)], dtype=_HEADER)
    body = torch.cat(
        [
            state.x.detach().reshape(n, 3),
            state.v.detach().reshape(n, 3),
            state.C.detach().reshape(n, 9),
            state.F.detach().reshape(n, 9),
            state.mass.detach().reshape(n, 1),
        ],
        dim=1,
    )
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(body.numpy().astype(_VALUE).tobytes())


def import_snapshot(path: str) -> ParticleState:
    with open(path, "rb") as f:
        content = f.read()
    if len(content) < _HEADER.itemsize:
        raise SnapshotFormatError(f"{path} is truncated: no complete header.")
    header = np.frombuffer(content[: _HEADER.itemsize], dtype=_HEADER)[0]
    if header["magic"] != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"{path} is not a PMGS snapshot (magic {header['magic']!r}).")
    if int(header["version"]) != SNAPSHOT_VERSION:
        raise SnapshotFormatError(
            f"{path} has snapshot version {int(header['version'])}, "
            f"this reader supports version {SNAPSHOT_VERSION}."
        )
    n = int(header["count"])
    expected = _HEADER.itemsize + n * VALUES_PER_PARTICLE * _VALUE.itemsize
    if len(content) != expected:
        raise SnapshotFormatError(
            f"{path} is truncated or padded: {len(content)} bytes, expected {expected}."
        )
    body = np.frombuffer(content[_HEADER.itemsize :], dtype=_VALUE).reshape(n, VALUES_PER_PARTICLE)
    values = torch.as_tensor(body.astype(np.float64))
    return ParticleState(
        x=values[:, 0:3].clone(),
        v=values[:, 3:6].clone(),
        C=values[:, 6:15].reshape(n, 3, 3).clone(),
        F=values[:, 15:24].reshape(n, 3, 3).clone(),
        mass=values[:, 24].clone(),
    )
