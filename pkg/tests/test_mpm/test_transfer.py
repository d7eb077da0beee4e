import numpy as np
import pytest
import torch

from physmorph.config import SimulationOptions
from physmorph.mpm import (
    ParticleOutsideMarginError,
    bspline_weights,
    deposit_mass,
    g2p,
    grid_update,
    p2g,
    stencil,
)
from physmorph.mpm.transfer import BOUNDARY_NODES, boundary_mask, clamp_to_margin
from physmorph.types import GridGeometry, GridState
from tests.utils import lattice_state, random_state


def test_bspline_partition_of_unity(rng):
    fx = torch.as_tensor(rng.uniform(0.5, 1.5, size=(100, 3)))
    weights = bspline_weights(fx)
    assert torch.allclose(weights.sum(-1), torch.ones(100, 3, dtype=torch.float64), atol=1e-14)
    assert bool((weights >= 0).all())


def test_stencil(rng):
    geometry = GridGeometry(resolution=8, dx=0.5)
    x = torch.as_tensor(rng.uniform(-1.0, 1.0, size=(30, 3)))
    st = stencil(x, geometry)
    assert st.nodes.shape == (30, 27)
    assert torch.allclose(st.weights.sum(-1), torch.ones(30, dtype=torch.float64), atol=1e-13)
    # The weighted offsets vanish for the quadratic kernel.
    first_moment = (st.weights[..., None] * st.offsets).sum(1)
    assert torch.allclose(first_moment, torch.zeros(30, 3, dtype=torch.float64), atol=1e-13)


@pytest.mark.parametrize("seed", range(50))
def test_mass_conservation(seed):
    rng = np.random.default_rng(seed)
    resolution = int(rng.choice([8, 12, 16]))
    geometry = GridGeometry(resolution=resolution, dx=float(rng.choice([0.25, 0.5, 1.0])))
    count = int(rng.integers(1, 500))
    state = random_state(count, rng)
    lo, hi = geometry.lower_margin, geometry.upper_margin
    x = rng.uniform(lo, hi, size=(count, 3))
    # Some particles sit right on the interior margin.
    on_margin = rng.random((count, 3)) < 0.1
    x = np.where(on_margin, np.where(rng.random((count, 3)) < 0.5, lo, hi), x)
    state.x = torch.as_tensor(x)

    grid_mass = deposit_mass(state.x, state.mass, geometry)
    assert grid_mass.shape == (resolution**3,)
    assert float(grid_mass.sum()) == pytest.approx(state.total_mass, rel=1e-10)

    params = SimulationOptions(grid_resolution=resolution, dx=geometry.dx)
    grid = p2g(state, params, geometry)
    assert grid.total_mass == pytest.approx(state.total_mass, rel=1e-10)
    assert bool((grid.mass >= 0).all())


def test_outside_margin(rng):
    geometry = GridGeometry(resolution=8, dx=1.0)
    state = random_state(5, rng, extent=0.5)
    state.x[3] = torch.tensor([3.5, 0.0, 0.0], dtype=torch.float64)
    with pytest.raises(ParticleOutsideMarginError) as e:
        deposit_mass(state.x, state.mass, geometry)
    assert e.value.index == 3
    with pytest.raises(ParticleOutsideMarginError):
        p2g(state, SimulationOptions(grid_resolution=8), geometry)


def test_boundary_is_sticky(rng):
    params = SimulationOptions(grid_resolution=8, drag=0.0, external_force=(0.0, 0.0, -9.8))
    geometry = GridGeometry(resolution=8, dx=1.0)
    grid = grid_update(p2g(random_state(40, rng, extent=1.9), params, geometry), params)
    mask = boundary_mask(8)
    assert int(mask.reshape(8, 8, 8)[BOUNDARY_NODES:-BOUNDARY_NODES, 2:-2, 2:-2].sum()) == 0
    assert torch.equal(grid.velocity[mask], torch.zeros_like(grid.velocity[mask]))
    # Empty nodes receive no force.
    empty = grid.mass == 0
    assert torch.equal(grid.velocity[empty], torch.zeros_like(grid.velocity[empty]))


def test_g2p_requires_updated_grid(lattice_params, rng):
    state = lattice_state(lattice_params, rng)
    geometry = GridGeometry(resolution=8, dx=1.0)
    with pytest.raises(ValueError, match="grid_update"):
        g2p(p2g(state, lattice_params, geometry), state, lattice_params)


def test_rest_state_stays_at_rest(lattice_params, rng):
    state = lattice_state(lattice_params, rng, velocity=0.0)
    geometry = GridGeometry(resolution=8, dx=1.0)
    params = lattice_params.copy(update={"external_force": (0.0, 0.0, 0.0)})
    next_state = g2p(grid_update(p2g(state, params, geometry), params), state, params)
    assert torch.allclose(next_state.x, state.x, atol=1e-14)
    assert torch.allclose(next_state.F, state.F, atol=1e-14)


def test_clamp_to_margin():
    geometry = GridGeometry(resolution=8, dx=1.0)
    x = torch.tensor([[0.0, 0.0, 0.0], [5.0, -5.0, 1.0]], dtype=torch.float64)
    clamped = clamp_to_margin(x, geometry)
    assert torch.equal(clamped[0], x[0])
    assert clamped[1].tolist() == [2.0, -2.0, 1.0]


def test_g2p_reproduces_a_linear_velocity_field(rng):
    params = SimulationOptions(grid_resolution=8, dx=0.5)
    geometry = GridGeometry(resolution=8, dx=0.5)
    axis = geometry.origin + geometry.dx * torch.arange(8, dtype=torch.float64)
    nodes = torch.stack(torch.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
    A = torch.as_tensor(rng.normal(size=(3, 3)))
    b = torch.as_tensor(rng.normal(size=3))
    grid = GridState(
        geometry=geometry,
        mass=torch.ones(8**3, dtype=torch.float64),
        momentum=torch.zeros(8**3, 3, dtype=torch.float64),
        velocity=nodes @ A.T + b,
    )
    state = random_state(40, rng, extent=0.9)

    moved = g2p(grid, state, params)
    expected = state.x @ A.T + b
    assert torch.allclose(moved.v, expected, atol=1e-10)
    assert torch.allclose(moved.C, A.expand(40, 3, 3), atol=1e-10)
