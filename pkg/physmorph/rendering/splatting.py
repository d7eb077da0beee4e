"""Differentiable splatting of 3D Gaussians into alpha, depth and color images.

Gaussians are sorted globally by camera depth, ties by index. Every Gaussian covers the pixels
of its 3-sigma box; the (gaussian, pixel) pairs are sorted by pixel then depth rank and
composited front to back with a segmented cumulative sum of log transmittance.
"""
from typing import Optional, Tuple

import numpy as np
import structlog
import torch

from physmorph.config import RenderOptions
from physmorph.rendering.camera import project
from physmorph.rendering.shading import phong_colors
from physmorph.types import (
    CameraModel,
    PhysMorphModel,
    RenderGaussians,
    RenderGraph,
    RenderTarget,
    Tensor,
)
from physmorph.utils.logs import TimerLogging

log = structlog.get_logger(__name__)

BOX_SIGMAS = 3.0
# Alpha below which a pixel shows the background depth.
EMPTY_ALPHA = 1e-6
ALPHA_FLOOR = 1e-8
FIRST_HIT_ALPHA = 0.1


class GaussianGradients(PhysMorphModel):
    means: Tensor
    covariances: Tensor
    opacities: Tensor


def _pixel_pairs(
    means2d: np.ndarray, radii: np.ndarray, order: np.ndarray, width: int, height: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(gaussian, pixel) pairs sorted by pixel then depth rank, and the first pair of each pixel."""
    u, v = means2d[order, 0], means2d[order, 1]
    r = radii[order]
    x0 = np.maximum(np.floor(u - r), 0).astype(np.int64)
    x1 = np.minimum(np.ceil(u + r), width - 1).astype(np.int64)
    y0 = np.maximum(np.floor(v - r), 0).astype(np.int64)
    y1 = np.minimum(np.ceil(v + r), height - 1).astype(np.int64)
    span_x = np.maximum(x1 - x0 + 1, 0)
    span_y = np.maximum(y1 - y0 + 1, 0)
    counts = span_x * span_y
    total = int(counts.sum())
    rank = np.repeat(np.arange(order.shape[0]), counts)
    local = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    wx = np.repeat(np.maximum(span_x, 1), counts)
    px = np.repeat(x0, counts) + local % wx
    py = np.repeat(y0, counts) + local // wx
    pixel = py * width + px
    perm = np.lexsort((rank, pixel))
    pixel, rank = pixel[perm], rank[perm]
    is_start = np.ones(total, dtype=bool)
    is_start[1:] = pixel[1:] != pixel[:-1]
    starts = np.nonzero(is_start)[0]
    first_of_pair = starts[np.cumsum(is_start) - 1]
    return order[rank], pixel, first_of_pair


def render(
    gaussians: RenderGaussians,
    camera: CameraModel,
    options: RenderOptions = RenderOptions(),
) -> RenderTarget:
    """Forward pass; the returned target keeps the autograd graph for `render_backward`."""
    height, width = camera.height, camera.width
    with TimerLogging("render"), torch.enable_grad():
        means = gaussians.means.detach().clone().requires_grad_(True)
        covariances = gaussians.covariances.detach().clone().requires_grad_(True)
        opacities = gaussians.opacities.detach().clone().requires_grad_(True)
        count = means.shape[0]

        projection = project(means, covariances, camera)
        cov2d = projection.covariances2d
        a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
        det = a * c - b * b
        conic = torch.stack([c / det, -b / det, a / det], -1)

        with torch.no_grad():
            largest = 0.5 * (a + c) + torch.sqrt(0.25 * (a - c) ** 2 + b * b)
            radii = np.ceil(BOX_SIGMAS * np.sqrt(largest.numpy()))
            depth_np = projection.depth.detach().numpy()
            valid = projection.valid.numpy()
        means2d_np = projection.means2d.detach().numpy()
        candidates = np.nonzero(valid)[0]
        order = candidates[np.lexsort((candidates, depth_np[candidates]))]
        gaussian_idx, pixel_idx, first = _pixel_pairs(means2d_np, radii, order, width, height)

        g_idx = torch.as_tensor(gaussian_idx, dtype=torch.int64)
        p_idx = torch.as_tensor(pixel_idx, dtype=torch.int64)
        centers = torch.stack(
            [
                torch.as_tensor(pixel_idx % width, dtype=torch.float64),
                torch.as_tensor(pixel_idx // width, dtype=torch.float64),
            ],
            -1,
        )
        delta = centers - projection.means2d[g_idx]
        q = conic[g_idx]
        power = -0.5 * (
            q[:, 0] * delta[:, 0] ** 2 + 2 * q[:, 1] * delta[:, 0] * delta[:, 1]
            + q[:, 2] * delta[:, 1] ** 2
        )
        g = torch.clamp(opacities[g_idx] * torch.exp(power), max=options.alpha_cap)
        log_free = torch.log1p(-g)
        exclusive = torch.cumsum(log_free, 0) - log_free
        first_t = torch.as_tensor(first, dtype=torch.int64)
        transmittance = torch.exp(exclusive - exclusive[first_t])
        active = (transmittance.detach() >= options.saturation_cutoff).to(g.dtype)
        weight = transmittance * g * active

        pixels = height * width
        alpha = torch.zeros(pixels, dtype=torch.float64).index_add(0, p_idx, weight)
        z = projection.depth[g_idx]
        depth_sum = torch.zeros(pixels, dtype=torch.float64).index_add(0, p_idx, weight * z)
        depth = torch.where(
            alpha > EMPTY_ALPHA,
            depth_sum / torch.clamp(alpha, min=ALPHA_FLOOR),
            torch.full_like(alpha, camera.far),
        )

    with torch.no_grad():
        weight_np = weight.detach().numpy()
        g_np = g.detach().numpy()
        contribution = np.bincount(gaussian_idx, weights=weight_np, minlength=count)
        unoccluded = np.bincount(gaussian_idx, weights=g_np, minlength=count)
        visibility = np.divide(contribution, unoccluded, out=np.zeros(count), where=unoccluded > 0)
        if gaussians.colors is not None:
            colors = gaussians.colors.detach().numpy()
        else:
            colors = phong_colors(
                means.detach(),
                covariances.detach(),
                options.particle_color,
                options.light_direction,
                camera,
            )
        color = np.zeros((pixels, 3))
        for channel in range(3):
            color[:, channel] = np.bincount(
                pixel_idx, weights=weight_np * colors[gaussian_idx, channel], minlength=pixels
            )
        color += (1.0 - alpha.detach().numpy())[:, None] * np.asarray(options.background)
        first_hit = np.full(pixels, camera.far)
        hits = g_np >= FIRST_HIT_ALPHA
        np.minimum.at(first_hit, pixel_idx[hits], depth_np[gaussian_idx[hits]])

    return RenderTarget(
        alpha=alpha.reshape(height, width),
        depth=depth.reshape(height, width),
        color=np.clip(color, 0.0, 1.0).reshape(height, width, 3),
        first_hit=first_hit.reshape(height, width),
        means2d=means2d_np,
        contribution=contribution,
        visibility=visibility,
        near=camera.near,
        far=camera.far,
        graph=RenderGraph(means, covariances, opacities, alpha, depth),
    )


def render_backward(
    target: RenderTarget,
    grad_alpha: Optional[torch.Tensor] = None,
    grad_depth: Optional[torch.Tensor] = None,
) -> GaussianGradients:
    """Gradients on means, covariances and opacities from (H, W) image gradients."""
    graph = target.graph
    if graph is None:
        raise ValueError("The render target holds no autograd graph.")
    zeros = GaussianGradients(
        means=torch.zeros_like(graph.means),
        covariances=torch.zeros_like(graph.covariances),
        opacities=torch.zeros_like(graph.opacities),
    )
    outputs, seeds = [], []
    for image, grad in ((graph.alpha, grad_alpha), (graph.depth, grad_depth)):
        if grad is not None and bool(grad.any()) and image.requires_grad:
            outputs.append(image)
            seeds.append(grad.reshape(-1).to(image.dtype))
    if not outputs:
        return zeros
    inputs = (graph.means, graph.covariances, graph.opacities)
    grads = torch.autograd.grad(outputs, inputs, seeds, retain_graph=True, allow_unused=True)
    means, covariances, opacities = (
        torch.zeros_like(i) if g is None else g for i, g in zip(inputs, grads)
    )
    return GaussianGradients(means=means, covariances=covariances, opacities=opacities)
