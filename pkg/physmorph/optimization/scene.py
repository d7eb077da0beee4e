"""Everything a training run needs before the first episode, derived from the config."""
import numpy as np
import structlog
import torch

from physmorph.config import PhysMorphConfig
from physmorph.mpm.engine import geometry_from
from physmorph.objectives.physics import TargetMassGrid, rasterize_target
from physmorph.rendering.splatting import render
from physmorph.scene.particles import init_particles
from physmorph.scene.shapes import EmptyShapeError, Shape, make_shape
from physmorph.types import (
    CameraModel,
    GridGeometry,
    ParticleState,
    PhysMorphModel,
    RenderGaussians,
    TargetImages,
)
from physmorph.utils.logs import TimerLogging
from physmorph.utils.seeding import make_rng

log = structlog.get_logger(__name__)

# Keys of the random streams derived from the experiment seed.
PARTICLES_STREAM = 0
TARGET_MASS_STREAM = 1
TARGET_IMAGES_STREAM = 2


def make_target_images(
    shape: Shape, camera: CameraModel, cfg: PhysMorphConfig, rng: np.random.Generator
) -> TargetImages:
    """Render the target as isotropic splats on its surface."""
    try:
        points = shape.sample_surface(cfg.render.target_samples, rng)
    except EmptyShapeError:
        log.warning("Target has no surface, empty target images.")
        return TargetImages(
            alpha=torch.zeros(camera.height, camera.width, dtype=torch.float64),
            depth=torch.full((camera.height, camera.width), camera.far, dtype=torch.float64),
        )
    scale = cfg.render.target_scale or cfg.covariance.child_scale
    count = points.shape[0]
    gaussians = RenderGaussians(
        means=torch.as_tensor(points, dtype=torch.float64),
        covariances=scale**2 * torch.eye(3, dtype=torch.float64).repeat(count, 1, 1),
        opacities=torch.full((count,), cfg.covariance.opacity, dtype=torch.float64),
    )
    with TimerLogging("target_images"):
        target = render(gaussians, camera, cfg.render)
    return TargetImages(alpha=target.alpha.detach(), depth=target.depth.detach())


class Scene(PhysMorphModel):
    """Source particles, target mass grid, camera and target images of an experiment."""

    config: PhysMorphConfig
    geometry: GridGeometry
    source: Shape
    target: Shape
    state0: ParticleState
    target_mass: TargetMassGrid
    camera: CameraModel
    target_images: TargetImages

    @classmethod
    def from_config(cls, cfg: PhysMorphConfig) -> "Scene":
        sim = cfg.simulation
        geometry = geometry_from(sim)
        source = make_shape(cfg.source, sim.dx)
        target = make_shape(cfg.target, sim.dx)
        state0 = init_particles(
            source, sim.anchor_count, sim.density, make_rng(cfg.seed, PARTICLES_STREAM), geometry
        )
        target_mass = rasterize_target(
            target,
            geometry,
            state0.total_mass,
            cfg.optimization.target_mass_samples,
            make_rng(cfg.seed, TARGET_MASS_STREAM),
            cfg.weights.epsilon,
        )
        camera = CameraModel.from_options(cfg.camera)
        target_images = make_target_images(
            target, camera, cfg, make_rng(cfg.seed, TARGET_IMAGES_STREAM)
        )
        log.info(
            "Scene ready.",
            anchors=state0.count,
            total_mass=state0.total_mass,
            image=f"{camera.width}x{camera.height}",
        )
        return cls(
            config=cfg,
            geometry=geometry,
            source=source,
            target=target,
            state0=state0,
            target_mass=target_mass,
            camera=camera,
            target_images=target_images,
        )
