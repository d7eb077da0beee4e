"""Per-pass pixel mask of silhouette edges and depth hits."""
import numpy as np
import structlog
from scipy import ndimage

from physmorph.config import RenderOptions
from physmorph.types import RenderTarget, VisibilityMask

log = structlog.get_logger(__name__)


def visibility_mask(
    target: RenderTarget, options: RenderOptions, rng: np.random.Generator
) -> VisibilityMask:
    """Dilated Sobel edges of alpha united with pixels that hit geometry.

    Below `mask_min_ratio` of the image the mask is disabled (every pixel); above
    `mask_max_ratio` it is subsampled to that ratio.
    """
    alpha = target.alpha.detach().numpy()
    depth = target.depth.detach().numpy()
    edges = np.hypot(
        ndimage.sobel(alpha, axis=1, mode="nearest"), ndimage.sobel(alpha, axis=0, mode="nearest")
    )
    edge_pixels = edges > options.edge_threshold
    if options.mask_dilation > 0 and edge_pixels.any():
        edge_pixels = ndimage.binary_dilation(edge_pixels, iterations=options.mask_dilation)
    pixels = edge_pixels | (depth < target.far)
    ratio = float(pixels.mean()) if pixels.size else 0.0
    mode = "edge_depth"
    if ratio < options.mask_min_ratio:
        log.debug("Mask area too small, mask disabled.", ratio=ratio)
        pixels = np.ones_like(pixels)
        mode = "disabled"
    elif ratio > options.mask_max_ratio:
        log.debug("Mask area too large, mask subsampled.", ratio=ratio)
        keep = int(options.mask_max_ratio * pixels.size)
        chosen = np.sort(rng.choice(np.flatnonzero(pixels), size=keep, replace=False))
        pixels = np.zeros(pixels.size, dtype=bool)
        pixels[chosen] = True
        pixels = pixels.reshape(alpha.shape)
        mode = "subsampled"

    height, width = alpha.shape
    means2d = target.means2d.reshape(-1, 2)
    col = np.round(means2d[:, 0]).astype(np.int64)
    row = np.round(means2d[:, 1]).astype(np.int64)
    inside = (col >= 0) & (col < width) & (row >= 0) & (row < height)
    visible = np.zeros(means2d.shape[0], dtype=bool)
    visible[inside] = pixels[row[inside], col[inside]]
    visible &= target.contribution > options.visible_contribution
    return VisibilityMask(pixels=pixels, visible=visible, mode=mode)
