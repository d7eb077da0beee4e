import copy
from typing import Any, Callable, Dict

import structlog
import torch

from physmorph.config import OptimizationOptions
from physmorph.types import ControlField

log = structlog.get_logger(__name__)


class ControlOptimizer:
    """Adam on the control field.

    Args:
        controls: Initial controls, copied.
        options: Step size, moment decay rates and line search settings.
    """

    def __init__(
        self, controls: ControlField, options: OptimizationOptions = OptimizationOptions()
    ):
        self.options = options
        self.stride = controls.stride
        self.values = controls.values.detach().clone().requires_grad_(True)
        self.adam = torch.optim.Adam(
            [self.values],
            lr=options.learning_rate,
            betas=(options.beta1, options.beta2),
            eps=options.adam_eps,
        )

    @property
    def controls(self) -> ControlField:
        return ControlField(values=self.values.detach().clone(), stride=self.stride)

    @property
    def step_count(self) -> int:
        state = self.adam.state.get(self.values, {})
        step = state.get("step", 0)
        return int(step.item() if isinstance(step, torch.Tensor) else step)

    def step(self, direction: torch.Tensor) -> None:
        """One bias-corrected Adam update along `direction` (shaped like the controls or flat)."""
        self.values.grad = direction.detach().reshape(self.values.shape).clone()
        self.adam.step()
        self.values.grad = None

    def step_with_line_search(
        self,
        direction: torch.Tensor,
        objective: Callable[[ControlField], float],
        reference: float,
    ) -> bool:
        """Adam update, halved until `objective` falls below `reference`.

        The moments keep the full update. When no trial decreases the objective, the controls
        go back to their previous values.

        Returns:
            Whether a step was accepted.
        """
        previous = self.values.detach().clone()
        self.step(direction)
        full_step = self.values.detach() - previous
        factor = 1.0
        for iteration in range(self.options.max_line_search_iterations):
            self._assign(previous + factor * full_step)
            value = objective(self.controls)
            if value < reference:
                log.debug("Line search accepted.", iteration=iteration, factor=factor, loss=value)
                return True
            factor *= 0.5
        log.warning("Line search found no decrease, step rejected.", reference=reference)
        self._assign(previous)
        return False

    def decay(self, gamma: float) -> None:
        self._assign(gamma * self.values.detach())

    def _assign(self, values: torch.Tensor) -> None:
        with torch.no_grad():
            self.values.copy_(values)

    def state_dict(self) -> Dict[str, Any]:
        return {
            "values": self.values.detach().clone(),
            "stride": self.stride,
            "adam": copy.deepcopy(self.adam.state_dict()),
        }

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        if state["values"].shape != self.values.shape:
            raise ValueError(
                f"Checkpoint controls of shape {tuple(state['values'].shape)} do not match "
                f"{tuple(self.values.shape)}."
            )
        self.stride = state["stride"]
        self._assign(state["values"])
        self.adam.load_state_dict(state["adam"])
