import math

import pytest
import torch

from physmorph.config import LossWeights
from physmorph.objectives import (
    TargetMassGrid,
    mass_loss,
    min_mass_penalty,
    physics_loss,
    rasterize_target,
)
from physmorph.scene import Box
from physmorph.types import GridGeometry


def test_mass_loss_at_target(rng):
    m = torch.as_tensor(rng.uniform(0.0, 5.0, size=64))
    loss, grad = mass_loss(m, m.clone(), 1e-6)
    assert loss == 0.0
    assert not bool(grad.any())


def test_mass_loss_value():
    m = torch.tensor([0.0, 1.0], dtype=torch.float64)
    target = torch.tensor([1.0, 1.0], dtype=torch.float64)
    loss, grad = mass_loss(m, target, 0.0)
    assert loss == pytest.approx(math.log(2.0) ** 2)
    assert grad[0] == pytest.approx(-2.0 * math.log(2.0))
    assert grad[1] == 0.0


def test_min_mass_penalty():
    m = torch.tensor([0.0, 0.5e-3, 2e-3], dtype=torch.float64)
    loss, grad = min_mass_penalty(m, 1e-3)
    assert loss == pytest.approx(1e-6 + 0.25e-6)
    assert grad.tolist() == pytest.approx([-2e-3, -1e-3, 0.0])


def test_physics_loss_gradient(rng):
    m = torch.as_tensor(rng.uniform(0.0, 2e-3, size=32)).requires_grad_(True)
    target = TargetMassGrid(mass=torch.as_tensor(rng.uniform(0.0, 3.0, size=32)))
    weights = LossWeights(mass=1.0, min_mass=5.0, m_min=1e-3)
    result = physics_loss(m.detach(), target, weights)

    diff = torch.log(m + 1.0 + target.epsilon) - torch.log(target.mass + 1.0 + target.epsilon)
    gap = torch.clamp(weights.m_min - m, min=0.0)
    reference = (diff**2).sum() + weights.min_mass * (gap**2).sum()
    (grad,) = torch.autograd.grad(reference, m)
    assert result.total == pytest.approx(float(reference))
    assert torch.allclose(result.grad, grad, atol=1e-12)


def test_zero_weights_give_zero_gradient(rng):
    m = torch.as_tensor(rng.uniform(0.0, 2.0, size=16))
    target = TargetMassGrid(mass=torch.as_tensor(rng.uniform(0.0, 2.0, size=16)))
    result = physics_loss(m, target, LossWeights(mass=0.0, min_mass=0.0))
    assert result.total == 0.0
    assert not bool(result.grad.any())


def test_rasterize_target(rng):
    geometry = GridGeometry(resolution=16, dx=1.0)
    target = rasterize_target(Box((0.0, 0.0, 0.0), (2.0, 2.0, 2.0)), geometry, 42.0, 5000, rng)
    assert target.mass.shape == (16**3,)
    assert target.total_mass == pytest.approx(42.0)
    volume = target.mass.reshape(16, 16, 16)
    # Nothing deposited far from the box.
    assert float(volume[:3].sum()) == 0.0
    with pytest.raises(ValueError):
        rasterize_target(Box((0.0, 0.0, 0.0), (7.0, 1.0, 1.0)), geometry, 1.0, 100, rng)
