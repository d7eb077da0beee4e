"""Image-space losses between rendered and target channels.

Each loss returns its value and the gradient with respect to the image it is differentiated on.
"""
from typing import Tuple

import numpy as np
import torch
import torch.nn.functional as nnf

from physmorph.config import LossWeights
from physmorph.types import PhysMorphModel, Tensor

SOBEL_X = torch.tensor([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]], dtype=torch.float64)
SOBEL_Y = SOBEL_X.T.contiguous()
MAGNITUDE_EPSILON = 1e-12


class RenderLoss(PhysMorphModel):
    total: float
    alpha: float
    depth: float
    edge: float
    shrink: float
    grad_alpha: Tensor
    grad_depth: Tensor
    grad_multipliers: Tensor


def alpha_loss(
    alpha: torch.Tensor, target: torch.Tensor, mask: torch.Tensor
) -> Tuple[float, torch.Tensor]:
    """Masked MSE scaled by the masked fraction of the image, i.e. sum over mask / all pixels."""
    weight = mask.to(alpha.dtype)
    if not bool(weight.any()):
        return 0.0, torch.zeros_like(alpha)
    diff = (alpha - target) * weight
    total = alpha.numel()
    return float((diff**2).sum() / total), 2.0 * diff / total


def depth_loss(
    depth: torch.Tensor,
    target_depth: torch.Tensor,
    alpha: torch.Tensor,
    target_alpha: torch.Tensor,
    mask: torch.Tensor,
    near: float,
    far: float,
    support_threshold: float = 0.5,
) -> Tuple[float, torch.Tensor]:
    """MSE of (far - near)-normalized depth where both alphas exceed the threshold, inside the mask.

    The mean over the support is scaled by the masked fraction of the image.
    """
    support = (alpha.detach() > support_threshold) & (target_alpha > support_threshold) & mask
    count = int(support.sum())
    if count == 0:
        return 0.0, torch.zeros_like(depth)
    span = far - near
    ratio = float(mask.sum()) / mask.numel()
    residual = torch.where(support, (depth - target_depth) / span, torch.zeros_like(depth))
    loss = float((residual**2).sum()) / count * ratio
    return loss, 2.0 * residual / span / count * ratio


def sobel_magnitude(image: torch.Tensor) -> torch.Tensor:
    padded = nnf.pad(image[None, None], (1, 1, 1, 1), mode="replicate")
    gx = nnf.conv2d(padded, SOBEL_X.to(image.dtype)[None, None])[0, 0]
    gy = nnf.conv2d(padded, SOBEL_Y.to(image.dtype)[None, None])[0, 0]
    return torch.sqrt(gx**2 + gy**2 + MAGNITUDE_EPSILON)


def edge_loss(alpha: torch.Tensor, target: torch.Tensor) -> Tuple[float, torch.Tensor]:
    with torch.enable_grad():
        image = alpha.detach().requires_grad_(True)
        loss = ((sobel_magnitude(image) - sobel_magnitude(target.detach())) ** 2).mean()
        (grad,) = torch.autograd.grad(loss, image)
    return float(loss), grad


def shrink_loss(multipliers: torch.Tensor, visibility: np.ndarray) -> Tuple[float, torch.Tensor]:
    """mean of multiplier * (1 - visibility); the visibility is treated as a constant."""
    if multipliers.numel() == 0:
        return 0.0, torch.zeros_like(multipliers)
    occlusion = 1.0 - torch.as_tensor(visibility, dtype=multipliers.dtype)
    count = multipliers.numel()
    return float((multipliers * occlusion).sum() / count), occlusion / count


def render_loss(
    alpha: torch.Tensor,
    depth: torch.Tensor,
    target_alpha: torch.Tensor,
    target_depth: torch.Tensor,
    mask: torch.Tensor,
    multipliers: torch.Tensor,
    visibility: np.ndarray,
    weights: LossWeights,
    near: float,
    far: float,
    support_threshold: float = 0.5,
) -> RenderLoss:
    """Weighted sum of the four channels; zero-weight channels contribute no gradient."""
    l_alpha, g_alpha = alpha_loss(alpha, target_alpha, mask)
    l_depth, g_depth = depth_loss(
        depth, target_depth, alpha, target_alpha, mask, near, far, support_threshold
    )
    l_edge, g_edge = (
        edge_loss(alpha, target_alpha) if weights.edge > 0 else (0.0, torch.zeros_like(alpha))
    )
    l_shrink, g_shrink = shrink_loss(multipliers, visibility)
    return RenderLoss(
        total=weights.alpha * l_alpha
        + weights.depth * l_depth
        + weights.edge * l_edge
        + weights.shrink * l_shrink,
        alpha=l_alpha,
        depth=l_depth,
        edge=l_edge,
        shrink=l_shrink,
        grad_alpha=weights.alpha * g_alpha + weights.edge * g_edge,
        grad_depth=weights.depth * g_depth,
        grad_multipliers=weights.shrink * g_shrink,
    )
