from typing import Tuple

import structlog
import torch

from physmorph.linalg import cofactor, polar_decompose

log = structlog.get_logger(__name__)

# Lower bound on J in the volumetric term.
J_FLOOR = 1e-8


def young_poisson_to_lame(young: float, poisson: float) -> Tuple[float, float]:
    """Return (mu, lambda)."""
    if not 0 < poisson < 0.5:
        raise ValueError(f"Poisson ratio must be in (0, 0.5), got {poisson}.")
    mu = young / (2.0 * (1.0 + poisson))
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    return mu, lam


def compute_stress(F: torch.Tensor, mu: float, lam: float) -> torch.Tensor:
    """Fixed-corotated first Piola-Kirchhoff stress, P = 2 mu (F - R) + lambda (J - 1) J F^{-T}.

    J F^{-T} is evaluated as the cofactor matrix. J is clamped at `J_FLOOR` in the volumetric
    factor and the clamped elements are reported.
    """
    r, _ = polar_decompose(F)
    j = torch.det(F)
    clamped = j <= J_FLOOR
    if bool(clamped.any()):
        log.warning("Degenerate deformation gradients, J clamped.", count=int(clamped.sum()))
    j = torch.clamp(j, min=J_FLOOR)
    return 2.0 * mu * (F - r) + lam * (j - 1.0)[..., None, None] * cofactor(F)


def apply_control(
    F: torch.Tensor, control: torch.Tensor, C: torch.Tensor, dt: float
) -> torch.Tensor:
    """F_next = (I + dt C)(F + control)."""
    eye = torch.eye(3, dtype=F.dtype)
    return (eye + dt * C) @ (F + control)
