# Do not reorder
from physmorph.types.general.array_type import Array, IndexTensor, Tensor
from physmorph.types.general.base_model import PhysMorphModel
from physmorph.types.particles import (
    MARGIN_CELLS,
    ControlField,
    GridGeometry,
    GridState,
    ParticleGradient,
    ParticleState,
)
from physmorph.types.bridge import InterpFootprint, SubdivisionPlan
from physmorph.types.rendering import (
    CameraModel,
    RenderGaussians,
    RenderGraph,
    RenderTarget,
    TargetImages,
    VisibilityMask,
)
from physmorph.types.reports import (
    EpisodeReport,
    EvaluationRow,
    GradcheckResult,
    MetricsSummary,
    PointSample,
    PointSource,
)
