"""Grid mass objective: log mass matching plus a penalty on nearly empty nodes."""
from typing import Tuple

import numpy as np
import structlog
import torch

from physmorph.config import LossWeights
from physmorph.mpm.transfer import deposit_mass
from physmorph.scene.shapes import Shape
from physmorph.types import GridGeometry, PhysMorphModel, Tensor
from physmorph.utils.logs import TimerLogging

log = structlog.get_logger(__name__)


class TargetMassGrid(PhysMorphModel):
    mass: Tensor
    epsilon: float = 1e-6

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())


class PhysicsLoss(PhysMorphModel):
    total: float
    mass: float
    min_mass: float
    grad: Tensor


def rasterize_target(
    shape: Shape,
    geometry: GridGeometry,
    total_mass: float,
    samples: int,
    rng: np.random.Generator,
    epsilon: float = 1e-6,
) -> TargetMassGrid:
    """Deposit equal-mass interior samples of `shape` with the transfer kernel."""
    shape.check_inside(geometry)
    with TimerLogging("rasterize_target"):
        points = torch.as_tensor(shape.sample_interior(samples, rng), dtype=torch.float64)
        unit = torch.full((samples,), 1.0 / samples, dtype=torch.float64)
        mass = deposit_mass(points, unit, geometry)
    mass = mass * (total_mass / mass.sum())
    return TargetMassGrid(mass=mass, epsilon=epsilon)


def mass_loss(m: torch.Tensor, target: torch.Tensor, epsilon: float) -> Tuple[float, torch.Tensor]:
    """sum (ln(m + 1 + eps) - ln(m* + 1 + eps))² and its per-node gradient."""
    diff = torch.log(m + 1.0 + epsilon) - torch.log(target + 1.0 + epsilon)
    return float((diff**2).sum()), 2.0 * diff / (m + 1.0 + epsilon)


def min_mass_penalty(m: torch.Tensor, m_min: float) -> Tuple[float, torch.Tensor]:
    """sum over nodes with m < m_min of (m_min - m)²."""
    gap = torch.where(m < m_min, m_min - m, torch.zeros_like(m))
    return float((gap**2).sum()), -2.0 * gap


def physics_loss(m: torch.Tensor, target: TargetMassGrid, weights: LossWeights) -> PhysicsLoss:
    l_mass, g_mass = mass_loss(m, target.mass, target.epsilon)
    l_min, g_min = min_mass_penalty(m, weights.m_min)
    return PhysicsLoss(
        total=weights.mass * l_mass + weights.min_mass * l_min,
        mass=l_mass,
        min_mass=l_min,
        grad=weights.mass * g_mass + weights.min_mass * g_min,
    )
