from typing import Optional, Tuple

import torch

from physmorph.metrics import chamfer, sample_cloud_surface, sample_shape_surface, stats
from physmorph.optimization.chain import render_state
from physmorph.optimization.scene import Scene
from physmorph.types import EvaluationRow, MetricsSummary, ParticleState
from physmorph.utils.seeding import make_rng

EVALUATION_STREAM = 5


def evaluate_state(
    scene: Scene,
    state: ParticleState,
    snapshot: str = "",
    multipliers: Optional[torch.Tensor] = None,
) -> Tuple[EvaluationRow, MetricsSummary]:
    """Chamfer distance between the visible shell of `state` and the target surface."""
    cfg = scene.config
    if multipliers is None:
        multipliers = torch.ones(state.count, dtype=torch.float64)
    rendered = render_state(scene, state, multipliers, make_rng(cfg.seed, EVALUATION_STREAM))
    n = cfg.metrics.surface_samples
    predicted = sample_cloud_surface(
        rendered.positions.numpy(),
        rendered.target.visibility,
        n,
        make_rng(cfg.seed, EVALUATION_STREAM, 1),
        cfg.metrics.shell_visibility,
    )
    reference = sample_shape_surface(scene.target, n, make_rng(cfg.seed, EVALUATION_STREAM, 2))
    summary = stats(rendered.covariances, state.count, cfg.metrics.histogram_bins)
    row = EvaluationRow(
        name=cfg.name,
        snapshot=snapshot,
        chamfer=chamfer(predicted, reference),
        anisotropy_mean=summary.anisotropy_mean,
        anisotropy_median=summary.anisotropy_median,
        anchor_count=summary.anchor_count,
        render_count=summary.render_count,
    )
    return row, summary
