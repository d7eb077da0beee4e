import os
from os.path import join as pjoin
from typing import Optional

import numpy as np
import orjson
import torch

from physmorph.config import PhysMorphConfig, SimulationOptions, parse_config
from physmorph.diagnostics import central_difference, relative_error  # noqa: F401
from physmorph.types import CameraModel, ParticleState
from physmorph.utils.conversion import orjson_dumps

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIG_ROOT = pjoin(PROJECT_ROOT, "config")
MICRO_CONFIG = pjoin(CONFIG_ROOT, "development", "micro", "conf.json")
SPHERE_TO_BOX_CONFIG = pjoin(CONFIG_ROOT, "examples", "sphere_to_box", "conf.json")
HARD_CONFIG = pjoin(CONFIG_ROOT, "examples", "stiffness", "hard", "conf.json")
SOFT_CONFIG = pjoin(CONFIG_ROOT, "examples", "stiffness", "soft", "conf.json")
DEPTH_ONLY_CONFIG = pjoin(CONFIG_ROOT, "examples", "supervision", "depth_only", "conf.json")

CUBE_OBJ = """v -1 -1 -1
v 1 -1 -1
v 1 1 -1
v -1 1 -1
v -1 -1 1
v 1 -1 1
v 1 1 1
v -1 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
"""


def config_from_file(path: str, output_dir: str, **overrides) -> PhysMorphConfig:
    with open(path, "rb") as f:
        data = orjson.loads(f.read())
    data["output_dir"] = output_dir
    data.update(overrides)
    return parse_config(data)


def write_json(path: str, data) -> str:
    with open(path, "wb") as f:
        f.write(orjson_dumps(data))
    return path


def write_cube_obj(folder: str) -> str:
    path = pjoin(folder, "cube.obj")
    with open(path, "w") as f:
        f.write(CUBE_OBJ)
    return path


def random_deformation(rng: np.random.Generator, count: int, spread: float = 0.2) -> torch.Tensor:
    return torch.eye(3, dtype=torch.float64) + spread * torch.as_tensor(
        rng.normal(size=(count, 3, 3))
    )


def random_rotation(rng: np.random.Generator, count: Optional[int] = None) -> torch.Tensor:
    """Proper rotations from the QR decomposition of gaussian matrices."""
    shape = (3, 3) if count is None else (count, 3, 3)
    q, r = torch.linalg.qr(torch.as_tensor(rng.normal(size=shape)))
    q = q * torch.sign(torch.diagonal(r, dim1=-2, dim2=-1))[..., None, :]
    sign = torch.where(torch.det(q) < 0, -1.0, 1.0).to(q.dtype)
    return q * torch.stack([sign, torch.ones_like(sign), torch.ones_like(sign)], -1)[..., None, :]


def lattice_state(
    params: SimulationOptions,
    rng: np.random.Generator,
    spacing: float = 0.5,
    per_axis: int = 3,
    jitter: float = 0.05,
    velocity: float = 0.1,
) -> ParticleState:
    """per_axis³ particles around the origin, slightly jittered and moving."""
    axis = spacing * (torch.arange(per_axis, dtype=torch.float64) - 0.5 * (per_axis - 1))
    x = torch.stack(torch.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
    count = x.shape[0]
    x = x + jitter * torch.as_tensor(rng.normal(size=(count, 3)))
    return ParticleState(
        x=x,
        v=velocity * torch.as_tensor(rng.normal(size=(count, 3))),
        C=torch.zeros(count, 3, 3, dtype=torch.float64),
        F=torch.eye(3, dtype=torch.float64).repeat(count, 1, 1),
        mass=torch.full((count,), params.density * spacing**3, dtype=torch.float64),
    )


def random_state(
    count: int, rng: np.random.Generator, extent: float = 1.5, spread: float = 0.1
) -> ParticleState:
    return ParticleState(
        x=torch.as_tensor(rng.uniform(-extent, extent, size=(count, 3))),
        v=torch.as_tensor(rng.normal(size=(count, 3))),
        C=0.1 * torch.as_tensor(rng.normal(size=(count, 3, 3))),
        F=random_deformation(rng, count, spread),
        mass=torch.as_tensor(rng.uniform(0.5, 2.0, size=count)),
    )


def micro_camera(size: int = 16, fx: float = 20.0) -> CameraModel:
    return CameraModel(
        fx=fx,
        fy=fx,
        cx=0.5 * (size - 1),
        cy=0.5 * (size - 1),
        width=size,
        height=size,
        near=0.1,
        far=20.0,
        eye=(0.0, -10.0, 0.0),
        target=(0.0, 0.0, 0.0),
    )
