"""Deformation-aware allocation of render-only children around anchors."""
import numpy as np
import structlog
import torch

from physmorph.bridge.spatial_index import SpatialIndex
from physmorph.config import BridgeOptions
from physmorph.types import SubdivisionPlan

log = structlog.get_logger(__name__)

SPACING_FLOOR = 1e-6


def deformation_magnitude(F: torch.Tensor) -> torch.Tensor:
    """|det(F) - 1|, large for both compression and expansion."""
    return (torch.det(F) - 1.0).abs()


def _uniform_counts(total: int, count: int) -> np.ndarray:
    counts = np.full(count, total // count, dtype=np.int64)
    counts[: total - int(counts.sum())] += 1
    return counts


def allocate_children(
    d: np.ndarray,
    child_budget: int,
    cap: int = 20,
    uniform_mix: float = 0.0,
    uniform_threshold: float = 1e-4,
) -> np.ndarray:
    """Children per anchor, proportional to the deformation magnitude and capped.

    A `uniform_mix` fraction of the budget is spread evenly whatever d is; when the average
    deformation is below `uniform_threshold` the whole budget is spread evenly. Remainders go
    to the lowest indices.
    """
    d = np.asarray(d, dtype=np.float64)
    count = d.shape[0]
    if count == 0 or child_budget <= 0:
        return np.zeros(count, dtype=np.int64)
    if d.mean() < uniform_threshold:
        log.debug("Negligible deformation, uniform subdivision.", mean=float(d.mean()))
        return np.minimum(_uniform_counts(child_budget, count), cap)
    uniform_part = int(np.floor(uniform_mix * child_budget))
    adaptive = np.floor(d / d.sum() * (child_budget - uniform_part)).astype(np.int64)
    counts = adaptive + _uniform_counts(uniform_part, count)
    return np.minimum(counts, cap)


def local_spacing(points: np.ndarray, k: int, dx: float = 1.0) -> np.ndarray:
    """Mean distance to the k nearest other points, floored at 1e-6 dx."""
    points = np.asarray(points, dtype=np.float64)
    k = min(k, points.shape[0] - 1)
    if k <= 0:
        return np.full(points.shape[0], SPACING_FLOOR * dx)
    _, distances = SpatialIndex(points).query(points, k + 1)
    # The query point itself is among the k + 1 nearest, at distance 0.
    spacing = distances.sum(axis=1) / k
    return np.maximum(spacing, SPACING_FLOOR * dx)


def plan_subdivision(
    x: torch.Tensor,
    F: torch.Tensor,
    options: BridgeOptions,
    rng: np.random.Generator,
    dx: float = 1.0,
) -> SubdivisionPlan:
    anchors = x.detach().numpy()
    count = anchors.shape[0]
    d = deformation_magnitude(F.detach()).numpy()
    counts = allocate_children(
        d,
        max(options.render_samples - count, 0),
        options.max_children_per_anchor,
        options.uniform_mix,
        options.uniform_threshold,
    )
    parents = np.repeat(np.arange(count, dtype=np.int64), counts)
    jitter = rng.normal(size=(parents.shape[0], 3))
    spacing = local_spacing(anchors, options.spacing_neighbors, dx)
    log.debug("Subdivision planned.", anchors=count, children=int(parents.shape[0]))
    return SubdivisionPlan(
        counts=counts,
        parents=parents,
        jitter=jitter,
        spacing=spacing,
        jitter_scale=options.jitter_scale,
    )


def spawn_children(plan: SubdivisionPlan, x: torch.Tensor) -> torch.Tensor:
    """x_parent + scale * h_parent * e; unit Jacobian with respect to the parent position."""
    offsets = plan.jitter_scale * plan.spacing[plan.parents, None] * plan.jitter
    return x[plan.parents] + offsets


def render_positions(plan: SubdivisionPlan, x: torch.Tensor) -> torch.Tensor:
    """Anchors first, then children."""
    return torch.cat([x, spawn_children(plan, x)])
