from enum import Enum
from typing import List

from physmorph.types.general.array_type import Array
from physmorph.types.general.base_model import PhysMorphModel


class EpisodeReport(PhysMorphModel):
    episode: int
    pass_index: int
    L_mass: float
    L_min: float
    L_physics: float
    L_alpha: float = 0.0
    L_depth: float = 0.0
    L_edge: float = 0.0
    L_shrink: float = 0.0
    L_render: float = 0.0
    L_total: float
    g_phys_norm: float
    g_render_norm: float = 0.0
    conflict: bool = False
    pcgrad_cosine: float = 0.0
    # Cosine of the physics gradient and the render gradient after projection.
    projected_cosine: float = 0.0
    alpha_mean: float = 0.0
    alpha_std: float = 0.0
    anisotropy_mean: float = 1.0
    anchor_count: int
    render_count: int = 0
    visible_count: int = 0
    mask_ratio: float = 0.0


class PointSource(str, Enum):
    predicted = "predicted"
    target = "target"


class PointSample(PhysMorphModel):
    points: Array[float]
    source: PointSource

    @property
    def count(self) -> int:
        return int(self.points.shape[0])


class MetricsSummary(PhysMorphModel):
    anisotropy_mean: float
    anisotropy_median: float
    histogram_counts: List[int]
    histogram_edges: List[float]
    anchor_count: int
    render_count: int


class EvaluationRow(PhysMorphModel):
    name: str
    snapshot: str
    chamfer: float
    anisotropy_mean: float
    anisotropy_median: float
    anchor_count: int
    render_count: int


class GradcheckResult(PhysMorphModel):
    name: str
    max_relative_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance
