import math

import pytest
import torch

from physmorph.metrics import stats


def test_isotropic_covariances():
    covariances = 0.3 * torch.eye(3, dtype=torch.float64).repeat(12, 1, 1)
    summary = stats(covariances, anchor_count=4, bins=5)
    assert summary.anisotropy_mean == pytest.approx(1.0)
    assert summary.anisotropy_median == pytest.approx(1.0)
    assert sum(summary.histogram_counts) == 12
    assert len(summary.histogram_edges) == 6
    assert (summary.anchor_count, summary.render_count) == (4, 12)


def test_histogram(rng):
    axes = torch.as_tensor(rng.uniform(0.5, 2.0, size=(40, 3)))
    summary = stats(torch.diag_embed(axes**2), anchor_count=10)
    assert sum(summary.histogram_counts) == 40
    assert len(summary.histogram_counts) == 20
    assert summary.histogram_edges[0] == pytest.approx(1.0)
    assert summary.anisotropy_mean >= 1.0


def test_no_render_particles():
    summary = stats(torch.zeros(0, 3, 3, dtype=torch.float64), anchor_count=0, bins=4)
    assert math.isnan(summary.anisotropy_mean)
    assert summary.histogram_counts == [0, 0, 0, 0]
