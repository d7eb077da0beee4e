from physmorph.objectives.physics import (
    PhysicsLoss,
    TargetMassGrid,
    mass_loss,
    min_mass_penalty,
    physics_loss,
    rasterize_target,
)
from physmorph.objectives.render import (
    RenderLoss,
    alpha_loss,
    depth_loss,
    edge_loss,
    render_loss,
    shrink_loss,
    sobel_magnitude,
)
