from typing import Dict, Optional

import structlog
import torch

from physmorph.mpm.engine import Tape, mpm_step
from physmorph.mpm.transfer import deposit_mass
from physmorph.types import ParticleGradient, PhysMorphModel, Tensor
from physmorph.utils.logs import TimerLogging

log = structlog.get_logger(__name__)


class TapeMismatchError(RuntimeError):
    pass


class AdjointSeed(PhysMorphModel):
    """Incoming gradients: on the final measurement grid mass and/or on intermediate states."""

    final_mass: Optional[Tensor] = None
    states: Dict[int, ParticleGradient] = {}


class AdjointResult(PhysMorphModel):
    controls: Tensor
    state0: ParticleGradient


def _is_zero(seed: AdjointSeed) -> bool:
    tensors = [] if seed.final_mass is None else [seed.final_mass]
    for grad in seed.states.values():
        tensors.extend(grad.as_tuple())
    return all(not bool(t.any()) for t in tensors)


def adjoint(tape: Tape, seed: AdjointSeed) -> AdjointResult:
    """Reverse pass over the tape.

    Every step is replayed from its checkpoint with autograd enabled; the replay must reproduce
    the recorded next state bit for bit.
    """
    steps = tape.steps
    state0 = tape.states[0]
    control_grads = torch.zeros_like(tape.controls.values)
    for t in seed.states:
        if not 0 <= t <= steps:
            raise TapeMismatchError(f"Gradient seeded at step {t}, the tape has {steps} steps.")
    if seed.final_mass is not None and seed.final_mass.shape != (tape.geometry.node_count,):
        raise TapeMismatchError(
            f"Final mass gradient of shape {tuple(seed.final_mass.shape)} does not match a "
            f"{tape.geometry.resolution}³ grid."
        )
    if _is_zero(seed):
        return AdjointResult(controls=control_grads, state0=ParticleGradient.zeros_like(state0))

    adj = seed.states.get(steps, ParticleGradient.zeros_like(state0))
    if seed.final_mass is not None:
        with torch.enable_grad():
            x = tape.states[-1].x.detach().requires_grad_(True)
            mass = deposit_mass(x, tape.states[-1].mass, tape.geometry)
            (grad_x,) = torch.autograd.grad(mass, x, seed.final_mass)
        adj = adj + ParticleGradient.partial(state0, x=grad_x)

    with TimerLogging("adjoint"):
        for t in reversed(range(steps)):
            leaves = tape.states[t].as_leaves()
            slot = tape.controls.slot_for_step(t)
            control = (
                None
                if slot is None
                else tape.controls.values[slot].detach().clone().requires_grad_(True)
            )
            with torch.enable_grad():
                replay = mpm_step(leaves, tape.params, tape.geometry, control)
            if not replay.bit_equal(tape.states[t + 1]):
                raise TapeMismatchError(f"Replay of step {t} does not match the recorded state.")
            inputs = list(leaves.differentiable()) + ([] if control is None else [control])
            grads = torch.autograd.grad(
                replay.differentiable(), inputs, adj.as_tuple(), allow_unused=True
            )
            grads = [torch.zeros_like(i) if g is None else g for i, g in zip(inputs, grads)]
            adj = ParticleGradient(x=grads[0], v=grads[1], C=grads[2], F=grads[3])
            if t in seed.states:
                adj = adj + seed.states[t]
            if control is not None:
                control_grads[slot] += grads[4]
    return AdjointResult(controls=control_grads, state0=adj)
