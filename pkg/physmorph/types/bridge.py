import torch

from physmorph.types.general.array_type import IndexTensor, Tensor
from physmorph.types.general.base_model import PhysMorphModel


class SubdivisionPlan(PhysMorphModel):
    """Children spawned around anchors, frozen for a pass.

    counts (N,) children per anchor, parents (M_child,), jitter (M_child, 3) unit normal draws,
    spacing (N,) local anchor spacing.
    """

    counts: IndexTensor
    parents: IndexTensor
    jitter: Tensor
    spacing: Tensor
    jitter_scale: float

    @property
    def anchor_count(self) -> int:
        return int(self.counts.shape[0])

    @property
    def child_count(self) -> int:
        return int(self.parents.shape[0])

    @property
    def render_count(self) -> int:
        return self.anchor_count + self.child_count

    def render_parents(self) -> torch.Tensor:
        """Parent anchor of every render particle; anchors come first and are their own parent."""
        return torch.cat([torch.arange(self.anchor_count, dtype=torch.int64), self.parents])


class InterpFootprint(PhysMorphModel):
    """Frozen neighbor sets and inverse-distance weights, one row per render particle."""

    coarse_index: IndexTensor
    coarse_weight: Tensor
    fine_index: IndexTensor
    fine_weight: Tensor
    temperature: float
    alpha_min: float
    alpha_max: float
