from typing import Union

import torch

from physmorph.config import CovarianceOptions
from physmorph.linalg import clamped_stretch_squared, polar_decompose

Scale = Union[float, torch.Tensor]


def _scale_squared(scale: Scale, like: torch.Tensor) -> torch.Tensor:
    s = torch.as_tensor(scale, dtype=like.dtype)
    return (s**2)[..., None, None] if s.ndim else s**2


def build_covariance(
    F: torch.Tensor, scale: Scale, options: CovarianceOptions = CovarianceOptions()
) -> torch.Tensor:
    """s² S_c², S_c the stretch of F with soft-clamped singular values.

    `scale` is a float or one value per Gaussian.
    """
    _, stretch = polar_decompose(F)
    squared = clamped_stretch_squared(
        stretch, options.clamp_min, options.clamp_max, options.clamp_sharpness
    )
    return _scale_squared(scale, F) * squared


def covariance_backward(
    F: torch.Tensor,
    scale: Scale,
    grad_covariance: torch.Tensor,
    options: CovarianceOptions = CovarianceOptions(),
) -> torch.Tensor:
    """dL/dF from dL/dSigma'."""
    with torch.enable_grad():
        leaf = F.detach().requires_grad_(True)
        covariance = build_covariance(leaf, scale, options)
        (grad,) = torch.autograd.grad(covariance, leaf, grad_covariance)
    return grad


def anisotropy(covariance: torch.Tensor) -> torch.Tensor:
    """Axis-length ratio sqrt(lambda_max / lambda_min)."""
    eigenvalues = torch.linalg.eigvalsh(covariance)
    return torch.sqrt(eigenvalues[..., -1] / eigenvalues[..., 0])
