import pytest
import torch

from physmorph.config import OptimizationOptions
from physmorph.optimization import ControlOptimizer
from physmorph.types import ControlField

SHAPE = (3, 4, 3, 3)


def _controls(steps=3, count=4, stride=1):
    return ControlField.zeros(steps, count, stride)


def test_zero_direction_leaves_controls_unchanged():
    optimizer = ControlOptimizer(_controls())
    optimizer.step(torch.zeros(SHAPE, dtype=torch.float64))
    assert not optimizer.controls.values.any()
    assert optimizer.step_count == 1


def test_first_step_has_learning_rate_size(rng):
    options = OptimizationOptions(learning_rate=0.05)
    optimizer = ControlOptimizer(_controls(), options)
    direction = torch.as_tensor(rng.normal(size=SHAPE))
    optimizer.step(direction.reshape(-1))
    values = optimizer.controls.values
    # Bias-corrected Adam moves every entry by the learning rate at the first step.
    assert torch.allclose(values, -0.05 * torch.sign(direction), atol=1e-6)


def test_controls_are_copied():
    controls = _controls()
    optimizer = ControlOptimizer(controls)
    optimizer.step(torch.ones(SHAPE, dtype=torch.float64))
    assert not controls.values.any()
    optimizer.controls.values.fill_(5.0)
    assert float(optimizer.controls.values.max()) < 1.0


def test_line_search_accepts_decrease():
    optimizer = ControlOptimizer(_controls(), OptimizationOptions(line_search=True))
    trials = []

    def objective(controls):
        trials.append(float(controls.values.sum()))
        return float(controls.values.sum())

    direction = torch.ones(SHAPE, dtype=torch.float64)
    assert optimizer.step_with_line_search(direction, objective, 0.0)
    assert len(trials) == 1
    assert torch.allclose(optimizer.controls.values, torch.full(SHAPE, -0.01, dtype=torch.float64))


def test_line_search_halves_then_rejects():
    options = OptimizationOptions(max_line_search_iterations=4)
    optimizer = ControlOptimizer(_controls(), options)
    factors = []

    def objective(controls):
        factors.append(float(controls.values.abs().max()) / 0.01)
        return 1.0

    accepted = optimizer.step_with_line_search(
        torch.ones(SHAPE, dtype=torch.float64), objective, 0.5
    )
    assert not accepted
    assert factors == pytest.approx([1.0, 0.5, 0.25, 0.125])
    assert not optimizer.controls.values.any()
    assert optimizer.step_count == 1


def test_decay():
    optimizer = ControlOptimizer(_controls())
    optimizer.step(torch.ones(SHAPE, dtype=torch.float64))
    before = optimizer.controls.values
    optimizer.decay(0.5)
    assert torch.allclose(optimizer.controls.values, 0.5 * before)
    optimizer.decay(0.0)
    assert not optimizer.controls.values.any()


def test_state_dict(rng):
    directions = [torch.as_tensor(rng.normal(size=(2, 4, 3, 3))) for _ in range(3)]
    reference = ControlOptimizer(_controls(steps=4, stride=2))
    for direction in directions:
        reference.step(direction)

    first = ControlOptimizer(_controls(steps=4, stride=2))
    first.step(directions[0])
    resumed = ControlOptimizer(_controls(steps=4, stride=2))
    resumed.load_state_dict(first.state_dict())
    for direction in directions[1:]:
        resumed.step(direction)
    assert torch.equal(resumed.controls.values, reference.controls.values)
    assert resumed.step_count == 3
    assert resumed.controls.stride == 2

    with pytest.raises(ValueError):
        ControlOptimizer(_controls(steps=5)).load_state_dict(first.state_dict())
