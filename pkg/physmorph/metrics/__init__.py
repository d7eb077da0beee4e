from physmorph.metrics.chamfer import chamfer
from physmorph.metrics.surface import sample_cloud_surface, sample_shape_surface
from physmorph.metrics.summary import stats
