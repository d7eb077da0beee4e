"""Combination of the physics and render gradients on the controls."""
import structlog
import torch
from pydantic import root_validator

from physmorph.types import PhysMorphModel, Tensor

log = structlog.get_logger(__name__)

# Gradients with a smaller norm are treated as absent.
NORM_FLOOR = 1e-12


class GradientBundle(PhysMorphModel):
    """Flat gradients of the physics and render losses over every control entry."""

    g_phys: Tensor
    g_render: Tensor

    @root_validator(skip_on_failure=True)
    def check_shapes(cls, values):
        if values["g_phys"].shape != values["g_render"].shape:
            raise ValueError(
                f"Gradient shapes differ: {tuple(values['g_phys'].shape)} and "
                f"{tuple(values['g_render'].shape)}."
            )
        return values

    @classmethod
    def from_controls(cls, g_phys: torch.Tensor, g_render: torch.Tensor) -> "GradientBundle":
        return cls(g_phys=g_phys.reshape(-1), g_render=g_render.reshape(-1))

    @property
    def conflict(self) -> bool:
        return bool(torch.dot(self.g_phys, self.g_render) < 0)

    def cosine(self) -> float:
        norms = float(self.g_phys.norm() * self.g_render.norm())
        if norms < NORM_FLOOR:
            return 0.0
        return float(torch.dot(self.g_phys, self.g_render)) / norms


def pcgrad(g_phys: torch.Tensor, g_render: torch.Tensor) -> torch.Tensor:
    """Remove from `g_render` its component against `g_phys`.

    Only the render gradient is projected; the physics gradient is never altered.
    """
    if g_phys.shape != g_render.shape:
        raise ValueError(f"Gradient shapes differ: {tuple(g_phys.shape)}, {tuple(g_render.shape)}.")
    norm_squared = torch.dot(g_phys.reshape(-1), g_phys.reshape(-1))
    if float(norm_squared) == 0.0:
        return g_render
    dot = torch.dot(g_render.reshape(-1), g_phys.reshape(-1))
    if float(dot) >= 0.0:
        return g_render
    log.debug("Conflicting gradients, render gradient projected.", dot=float(dot))
    return g_render - (dot / norm_squared) * g_phys


def _unit(g: torch.Tensor) -> torch.Tensor:
    norm = g.norm()
    if float(norm) < NORM_FLOOR:
        return torch.zeros_like(g)
    return g / norm


def fuse(g_phys: torch.Tensor, g_render: torch.Tensor) -> torch.Tensor:
    """Sum of the unit-normalized gradients; vanishing terms are dropped."""
    if g_phys.shape != g_render.shape:
        raise ValueError(f"Gradient shapes differ: {tuple(g_phys.shape)}, {tuple(g_render.shape)}.")
    return _unit(g_phys) + _unit(g_render)
