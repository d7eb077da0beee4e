import numpy as np
import torch

from physmorph.rendering.covariance import anisotropy
from physmorph.types import MetricsSummary


def stats(covariances: torch.Tensor, anchor_count: int, bins: int = 20) -> MetricsSummary:
    """Anisotropy distribution of the render Gaussians and particle counts."""
    values = anisotropy(covariances.detach()).numpy() if covariances.shape[0] else np.ones(0)
    if values.size:
        lower = min(float(values.min()), 1.0)
        upper = max(float(values.max()), 1.0 + 1e-9)
        counts, edges = np.histogram(values, bins=bins, range=(lower, upper))
        mean, median = float(values.mean()), float(np.median(values))
    else:
        counts, edges = np.zeros(bins, dtype=np.int64), np.linspace(1.0, 2.0, bins + 1)
        mean = median = float("nan")
    return MetricsSummary(
        anisotropy_mean=mean,
        anisotropy_median=median,
        histogram_counts=counts.tolist(),
        histogram_edges=edges.tolist(),
        anchor_count=anchor_count,
        render_count=int(covariances.shape[0]),
    )
