"""Two-scale deformation gradient field on render particles."""
from typing import Tuple

import numpy as np
import structlog
import torch

from physmorph.bridge.spatial_index import SpatialIndex, inverse_distance_weights
from physmorph.bridge.subdivision import deformation_magnitude, plan_subdivision, render_positions
from physmorph.config import BridgeOptions
from physmorph.types import InterpFootprint, PhysMorphModel, SubdivisionPlan

log = structlog.get_logger(__name__)


def build_footprint(
    positions: np.ndarray, anchors: np.ndarray, options: BridgeOptions
) -> InterpFootprint:
    """Coarse and fine anchor neighborhoods of every render particle, frozen afterwards."""
    index = SpatialIndex(anchors)
    k_coarse = min(options.coarse_neighbors, index.count)
    k_fine = min(options.fine_neighbors, index.count)
    coarse_index, coarse_distance = index.query(positions, k_coarse)
    fine_index, fine_distance = index.query(positions, k_fine)
    return InterpFootprint(
        coarse_index=coarse_index,
        coarse_weight=inverse_distance_weights(coarse_distance),
        fine_index=fine_index,
        fine_weight=inverse_distance_weights(fine_distance),
        temperature=options.temperature,
        alpha_min=options.alpha_min,
        alpha_max=options.alpha_max,
    )


def interpolate_F(
    anchor_F: torch.Tensor, footprint: InterpFootprint
) -> Tuple[torch.Tensor, torch.Tensor]:
    coarse = torch.einsum("mk,mkij->mij", footprint.coarse_weight, anchor_F[footprint.coarse_index])
    fine = torch.einsum("mk,mkij->mij", footprint.fine_weight, anchor_F[footprint.fine_index])
    return coarse, fine


def blend(
    coarse: torch.Tensor,
    fine: torch.Tensor,
    temperature: float,
    alpha_min: float,
    alpha_max: float,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Favor the coarse field where it deforms more than the fine one."""
    if temperature <= 0:
        raise ValueError(f"Blend temperature must be positive, got {temperature}.")
    gap = deformation_magnitude(coarse) - deformation_magnitude(fine)
    alpha = torch.clamp(torch.sigmoid(gap / temperature), alpha_min, alpha_max)
    final = alpha[:, None, None] * coarse + (1.0 - alpha[:, None, None]) * fine
    return final, alpha


def scatter_gradients(
    footprint: InterpFootprint,
    plan: SubdivisionPlan,
    anchor_F: torch.Tensor,
    grad_F_final: torch.Tensor,
    grad_means: torch.Tensor,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Transpose of the bridge: render gradients to (dL/dF, dL/dx) on anchors.

    The F path is the exact adjoint of interpolate_F followed by blend with frozen weights;
    mean gradients go to the parent anchor position.
    """
    with torch.enable_grad():
        leaf = anchor_F.detach().requires_grad_(True)
        coarse, fine = interpolate_F(leaf, footprint)
        final, _ = blend(
            coarse, fine, footprint.temperature, footprint.alpha_min, footprint.alpha_max
        )
        (grad_F,) = torch.autograd.grad(final, leaf, grad_F_final)
    grad_x = torch.zeros(plan.anchor_count, 3, dtype=grad_means.dtype).index_add(
        0, plan.render_parents(), grad_means
    )
    return grad_F, grad_x


class Bridge(PhysMorphModel):
    """Subdivision plan and interpolation footprint for one pass."""

    plan: SubdivisionPlan
    footprint: InterpFootprint

    def positions(self, x: torch.Tensor) -> torch.Tensor:
        return render_positions(self.plan, x)

    def deformation(self, anchor_F: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        coarse, fine = interpolate_F(anchor_F, self.footprint)
        return blend(
            coarse,
            fine,
            self.footprint.temperature,
            self.footprint.alpha_min,
            self.footprint.alpha_max,
        )


def build_bridge(
    x: torch.Tensor,
    F: torch.Tensor,
    options: BridgeOptions,
    rng: np.random.Generator,
    dx: float = 1.0,
) -> Bridge:
    plan = plan_subdivision(x, F, options, rng, dx)
    positions = render_positions(plan, x.detach()).numpy()
    footprint = build_footprint(positions, x.detach().numpy(), options)
    return Bridge(plan=plan, footprint=footprint)
