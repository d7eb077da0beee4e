from typing import Optional, Tuple

import torch
from pydantic import Field

from physmorph.types.general.array_type import Tensor
from physmorph.types.general.base_model import PhysMorphModel

# Particles must stay this many cells away from the grid boundary.
MARGIN_CELLS = 2


class ParticleState(PhysMorphModel):
    """Anchor particles. x (N, 3), v (N, 3), C (N, 3, 3), F (N, 3, 3), mass (N,)."""

    x: Tensor
    v: Tensor
    C: Tensor
    F: Tensor
    mass: Tensor

    @property
    def count(self) -> int:
        return int(self.x.shape[0])

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def detach(self) -> "ParticleState":
        return ParticleState(
            x=self.x.detach(),
            v=self.v.detach(),
            C=self.C.detach(),
            F=self.F.detach(),
            mass=self.mass.detach(),
        )

    def clone(self) -> "ParticleState":
        return ParticleState(
            x=self.x.detach().clone(),
            v=self.v.detach().clone(),
            C=self.C.detach().clone(),
            F=self.F.detach().clone(),
            mass=self.mass.detach().clone(),
        )

    def as_leaves(self) -> "ParticleState":
        """Detached copy whose differentiable fields require grad."""
        return ParticleState(
            x=self.x.detach().clone().requires_grad_(True),
            v=self.v.detach().clone().requires_grad_(True),
            C=self.C.detach().clone().requires_grad_(True),
            F=self.F.detach().clone().requires_grad_(True),
            mass=self.mass.detach(),
        )

    def differentiable(self) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        return self.x, self.v, self.C, self.F

    def bit_equal(self, other: "ParticleState") -> bool:
        return all(
            torch.equal(a.detach(), b.detach())
            for a, b in zip(
                (*self.differentiable(), self.mass), (*other.differentiable(), other.mass)
            )
        )

    def translated(self, offset: torch.Tensor) -> "ParticleState":
        return ParticleState(x=self.x + offset, v=self.v, C=self.C, F=self.F, mass=self.mass)


class ParticleGradient(PhysMorphModel):
    """Gradient of a scalar with respect to the differentiable fields of a ParticleState."""

    x: Tensor
    v: Tensor
    C: Tensor
    F: Tensor

    @classmethod
    def zeros_like(cls, state: ParticleState) -> "ParticleGradient":
        return cls(
            x=torch.zeros_like(state.x),
            v=torch.zeros_like(state.v),
            C=torch.zeros_like(state.C),
            F=torch.zeros_like(state.F),
        )

    @classmethod
    def partial(
        cls,
        state: ParticleState,
        x: Optional[torch.Tensor] = None,
        v: Optional[torch.Tensor] = None,
        C: Optional[torch.Tensor] = None,
        F: Optional[torch.Tensor] = None,
    ) -> "ParticleGradient":
        zeros = cls.zeros_like(state)
        return cls(
            x=zeros.x if x is None else x,
            v=zeros.v if v is None else v,
            C=zeros.C if C is None else C,
            F=zeros.F if F is None else F,
        )

    def as_tuple(self) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        return self.x, self.v, self.C, self.F

    def __add__(self, other: "ParticleGradient") -> "ParticleGradient":
        return ParticleGradient(
            x=self.x + other.x, v=self.v + other.v, C=self.C + other.C, F=self.F + other.F
        )


class ControlField(PhysMorphModel):
    """Control deformation gradients, one (N, 3, 3) slot per control step.

    Slot k is applied on simulation step k * stride; other steps use a zero control.
    """

    values: Tensor
    stride: int = Field(1, ge=1, le=3)

    @staticmethod
    def slot_count(steps: int, stride: int) -> int:
        return -(-steps // stride)

    @classmethod
    def zeros(cls, steps: int, count: int, stride: int = 1) -> "ControlField":
        values = torch.zeros(cls.slot_count(steps, stride), count, 3, 3, dtype=torch.float64)
        return cls(values=values, stride=stride)

    def slot_for_step(self, step: int) -> Optional[int]:
        if step % self.stride != 0:
            return None
        slot = step // self.stride
        return slot if slot < self.values.shape[0] else None


class GridGeometry(PhysMorphModel):
    """Cubic lattice centered on the origin."""

    resolution: int
    dx: float

    @property
    def origin(self) -> float:
        return -0.5 * self.resolution * self.dx

    @property
    def node_count(self) -> int:
        return self.resolution**3

    @property
    def lower_margin(self) -> float:
        return self.origin + MARGIN_CELLS * self.dx

    @property
    def upper_margin(self) -> float:
        return self.origin + (self.resolution - MARGIN_CELLS) * self.dx

    def to_grid(self, x: torch.Tensor) -> torch.Tensor:
        return (x - self.origin) / self.dx


class GridState(PhysMorphModel):
    """Flattened node arrays: mass (R³,), momentum (R³, 3), velocity after grid_update."""

    geometry: GridGeometry
    mass: Tensor
    momentum: Tensor
    velocity: Optional[Tensor] = None
    # dL/dmass, set by the physics objective before the adjoint pass.
    mass_grad: Optional[Tensor] = None

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())
