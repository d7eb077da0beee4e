from typing import Optional

import numpy as np
import structlog
import torch

from physmorph.scene.shapes import Shape
from physmorph.types import GridGeometry, ParticleState

log = structlog.get_logger(__name__)


def init_particles(
    shape: Shape,
    count: int,
    density: float,
    rng: np.random.Generator,
    geometry: Optional[GridGeometry] = None,
) -> ParticleState:
    """Uniform interior fill at rest: F = I, v = 0, C = 0, mass = density * volume / count."""
    if count <= 0:
        raise ValueError(f"Particle count must be positive, got {count}.")
    if geometry is not None:
        shape.check_inside(geometry)
    x = torch.as_tensor(shape.sample_interior(count, rng), dtype=torch.float64)
    mass = torch.full((count,), density * shape.volume / count, dtype=torch.float64)
    log.info("Particles initialized.", count=count, total_mass=float(mass.sum()))
    return ParticleState(
        x=x,
        v=torch.zeros(count, 3, dtype=torch.float64),
        C=torch.zeros(count, 3, 3, dtype=torch.float64),
        F=torch.eye(3, dtype=torch.float64).repeat(count, 1, 1),
        mass=mass,
    )
