from physmorph.bridge.spatial_index import SpatialIndex, inverse_distance_weights, knn
from physmorph.bridge.subdivision import (
    allocate_children,
    deformation_magnitude,
    local_spacing,
    plan_subdivision,
    render_positions,
    spawn_children,
)
from physmorph.bridge.interpolation import (
    Bridge,
    blend,
    build_bridge,
    build_footprint,
    interpolate_F,
    scatter_gradients,
)
