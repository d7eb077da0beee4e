from typing import List, Optional, Tuple

import structlog
import torch

from physmorph.config import SimulationOptions
from physmorph.mpm.transfer import deposit_mass, g2p, grid_update, p2g
from physmorph.types import ControlField, GridGeometry, GridState, ParticleState, PhysMorphModel
from physmorph.utils.logs import TimerLogging

log = structlog.get_logger(__name__)


class Tape(PhysMorphModel):
    """Per-step checkpoints of a forward run; states[t] is the input of step t."""

    states: List[ParticleState]
    controls: ControlField
    params: SimulationOptions
    geometry: GridGeometry

    @property
    def steps(self) -> int:
        return len(self.states) - 1


class Trajectory(PhysMorphModel):
    states: List[ParticleState]
    final_grid: GridState

    @property
    def final_state(self) -> ParticleState:
        return self.states[-1]


def geometry_from(params: SimulationOptions) -> GridGeometry:
    return GridGeometry(resolution=params.grid_resolution, dx=params.dx)


def mpm_step(
    state: ParticleState,
    params: SimulationOptions,
    geometry: GridGeometry,
    control: Optional[torch.Tensor] = None,
) -> ParticleState:
    grid = grid_update(p2g(state, params, geometry), params)
    return g2p(grid, state, params, control)


def measurement_grid(state: ParticleState, geometry: GridGeometry) -> GridState:
    """Grid mass of a state, the quantity compared against the target."""
    mass = deposit_mass(state.x, state.mass, geometry)
    momentum = torch.zeros(mass.shape[0], 3, dtype=mass.dtype)
    return GridState(geometry=geometry, mass=mass, momentum=momentum)


def simulate(
    state0: ParticleState,
    controls: ControlField,
    params: SimulationOptions,
    steps: Optional[int] = None,
) -> Tuple[Trajectory, Tape]:
    """Run `steps` MLS-MPM steps (default `params.steps`) and record the checkpoints."""
    steps = params.steps if steps is None else steps
    if steps < 1:
        raise ValueError(f"simulate requires at least one step, got {steps}.")
    if controls.values.shape[1:] != (state0.count, 3, 3):
        raise ValueError(
            f"Controls of shape {tuple(controls.values.shape)} do not match "
            f"{state0.count} particles."
        )
    geometry = geometry_from(params)
    states = [state0.detach()]
    with TimerLogging("simulate"), torch.no_grad():
        for t in range(steps):
            slot = controls.slot_for_step(t)
            control = None if slot is None else controls.values[slot]
            states.append(mpm_step(states[-1], params, geometry, control))
        final_grid = measurement_grid(states[-1], geometry)
    tape = Tape(
        states=states,
        controls=ControlField(values=controls.values.detach().clone(), stride=controls.stride),
        params=params,
        geometry=geometry,
    )
    return Trajectory(states=states, final_grid=final_grid), tape


def kinetic_energy(state: ParticleState) -> float:
    return float(0.5 * (state.mass * (state.v**2).sum(dim=-1)).sum())
