import os
from enum import Enum
from os.path import join as pjoin
from typing import Any, Dict, List, Optional, Tuple, TypeVar

import jsonlines
import orjson
import structlog
from pydantic import BaseModel, BaseSettings, Extra, Field, ValidationError, root_validator

from physmorph.utils.conversion import md5_hash, orjson_dumps

log = structlog.get_logger(__name__)
T = TypeVar("T", bound="PhysMorphConfig")

Vector3 = Tuple[float, float, float]

CONFIG_ECHO_FILENAME = "config.json"
CONFIG_HISTORY_FILENAME = "config_history.jsonl"


class PhysMorphValidationError(Exception):
    pass


class PhysMorphOptions(BaseModel):
    class Config:
        extra = Extra.forbid
        validate_assignment = True


class ShapeKind(str, Enum):
    sphere = "sphere"
    box = "box"
    cylinder = "cylinder"
    torus = "torus"
    capsule = "capsule"
    heart = "heart"
    pillar = "pillar"
    mesh = "mesh"


class ShapeSpec(PhysMorphOptions):
    """Source or target shape, in grid units.

    `radius` is the sphere/cylinder/capsule radius, the torus major radius and the overall size
    of the heart and pillar compositions. `height` is the cylinder, capsule and pillar length
    along z. Meshes are read from `path` (Wavefront OBJ) and multiplied by `scale`.
    """

    kind: ShapeKind = ShapeKind.sphere
    center: Vector3 = (0.0, 0.0, 0.0)
    radius: float = Field(4.0, ge=0)
    minor_radius: float = Field(1.5, ge=0)
    half_extents: Vector3 = (3.2, 3.2, 3.2)
    height: float = Field(6.0, ge=0)
    scale: float = Field(1.0, gt=0)
    path: Optional[str] = None

    @root_validator(skip_on_failure=True)
    def check_mesh_path(cls, values):
        if values["kind"] == ShapeKind.mesh:
            path = values.get("path")
            if not path:
                raise ValueError("A mesh shape requires `path`.")
            if not os.path.isfile(path):
                raise ValueError(f"Mesh file {path} does not exist.")
        if any(h < 0 for h in values["half_extents"]):
            raise ValueError("half_extents must be non-negative.")
        return values


class SimulationOptions(PhysMorphOptions):
    grid_resolution: int = Field(32, ge=8)
    dx: float = Field(1.0, gt=0)
    dt: float = Field(1.0 / 120.0, gt=0)
    lame_mu: float = Field(1.0e3, gt=0)
    lame_lambda: float = Field(2.0e4, gt=0)
    # When both are set they replace the Lamé pair.
    young_modulus: Optional[float] = Field(None, gt=0)
    poisson_ratio: Optional[float] = Field(None, gt=0, lt=0.5)
    drag: float = Field(0.5, ge=0, le=1)
    external_force: Vector3 = (0.0, 0.0, 0.0)
    density: float = Field(60.0, gt=0)
    anchor_count: int = Field(1000, gt=0)
    steps: int = Field(10, ge=1)
    control_stride: int = Field(1, ge=1, le=3)

    @root_validator(skip_on_failure=True)
    def apply_young_poisson(cls, values):
        young, poisson = values.get("young_modulus"), values.get("poisson_ratio")
        if (young is None) != (poisson is None):
            raise ValueError("young_modulus and poisson_ratio must be set together.")
        if young is not None:
            values["lame_mu"] = young / (2.0 * (1.0 + poisson))
            values["lame_lambda"] = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
        return values


class BridgeOptions(PhysMorphOptions):
    render_samples: int = Field(4000, ge=1)
    max_children_per_anchor: int = Field(20, ge=0)
    coarse_neighbors: int = Field(64, ge=1)
    fine_neighbors: int = Field(16, ge=1)
    spacing_neighbors: int = Field(8, ge=1)
    temperature: float = Field(0.1, gt=0)
    alpha_min: float = Field(0.2, ge=0, le=1)
    alpha_max: float = Field(0.8, ge=0, le=1)
    jitter_scale: float = Field(0.1, ge=0)
    uniform_mix: float = Field(0.02, ge=0, le=1)
    uniform_threshold: float = Field(1e-4, ge=0)

    @root_validator(skip_on_failure=True)
    def check_alpha_range(cls, values):
        if values["alpha_min"] > values["alpha_max"]:
            raise ValueError("alpha_min must be lower or equal to alpha_max.")
        return values


class CovarianceOptions(PhysMorphOptions):
    anchor_scale: float = Field(0.055, gt=0)
    child_scale: float = Field(0.036, gt=0)
    clamp_min: float = Field(0.35, gt=0)
    clamp_max: float = Field(2.5, gt=0)
    clamp_sharpness: float = Field(20.0, gt=0)
    opacity: float = Field(0.8, gt=0, le=1)

    @root_validator(skip_on_failure=True)
    def check_clamp(cls, values):
        if values["clamp_min"] >= values["clamp_max"]:
            raise ValueError("clamp_min must be lower than clamp_max.")
        return values


class CameraOptions(PhysMorphOptions):
    """Full-resolution pinhole camera; `resolution_scale` shrinks image and intrinsics."""

    width: int = Field(3840, ge=1)
    height: int = Field(2160, ge=1)
    fx: float = Field(1425.0, gt=0)
    fy: float = Field(1425.0, gt=0)
    cx: float = 1920.0
    cy: float = 1080.0
    near: float = Field(0.01, gt=0)
    far: float = Field(100.0, gt=0)
    eye: Vector3 = (20.0, -25.0, 12.5)
    target: Vector3 = (0.0, 0.0, 0.0)
    up: Vector3 = (0.0, 0.0, 1.0)
    resolution_scale: float = Field(1.0 / 15.0, gt=0, le=1)

    @root_validator(skip_on_failure=True)
    def check_depth_range(cls, values):
        if values["near"] >= values["far"]:
            raise ValueError("near must be lower than far.")
        return values


class RenderOptions(PhysMorphOptions):
    background: Vector3 = (1.0, 1.0, 1.0)
    particle_color: Vector3 = (0.27, 0.51, 0.71)
    light_direction: Vector3 = (0.3, -0.5, 0.8)
    alpha_cap: float = Field(0.999, gt=0, lt=1)
    saturation_cutoff: float = Field(1e-4, ge=0)
    mask_min_ratio: float = Field(0.05, ge=0, le=1)
    mask_max_ratio: float = Field(0.6, ge=0, le=1)
    edge_threshold: float = Field(0.05, ge=0)
    mask_dilation: int = Field(2, ge=0)
    visible_contribution: float = Field(1e-3, ge=0)
    depth_support: float = Field(0.5, ge=0, le=1)
    target_samples: int = Field(20000, ge=1)
    # Defaults to covariance.child_scale.
    target_scale: Optional[float] = Field(None, gt=0)
    opacity_lr: float = Field(0.1, ge=0)
    multiplier_min: float = Field(0.05, gt=0, le=1)
    multiplier_max: float = Field(1.0, gt=0, le=1)
    # Timesteps where render losses are evaluated, final state when unset.
    render_timesteps: Optional[List[int]] = None

    @root_validator(skip_on_failure=True)
    def check_ratios(cls, values):
        if values["mask_min_ratio"] > values["mask_max_ratio"]:
            raise ValueError("mask_min_ratio must be lower or equal to mask_max_ratio.")
        if values["multiplier_min"] > values["multiplier_max"]:
            raise ValueError("multiplier_min must be lower or equal to multiplier_max.")
        return values


class LossWeights(PhysMorphOptions):
    mass: float = Field(1.0, ge=0)
    min_mass: float = Field(5.0, ge=0)
    alpha: float = Field(1.5, ge=0)
    depth: float = Field(4.0, ge=0)
    edge: float = Field(3.0, ge=0)
    shrink: float = Field(0.5, ge=0)
    m_min: float = Field(1e-3, ge=0)
    epsilon: float = Field(1e-6, gt=0)

    @property
    def render_active(self) -> bool:
        return any(w > 0 for w in (self.alpha, self.depth, self.edge, self.shrink))


class OptimizationOptions(PhysMorphOptions):
    episodes: int = Field(40, ge=0)
    passes: int = Field(3, ge=1)
    learning_rate: float = Field(0.01, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    control_decay: float = Field(0.955, ge=0, le=1)
    physics_pass_step: bool = True
    line_search: bool = False
    max_line_search_iterations: int = Field(15, ge=1)
    refresh_footprint_per_pass: bool = True
    chain_episodes: bool = True
    target_mass_samples: int = Field(200000, ge=1)


class MetricsOptions(PhysMorphOptions):
    surface_samples: int = Field(10000, ge=1)
    histogram_bins: int = Field(20, ge=1)
    shell_visibility: float = Field(0.5, ge=0, le=1)


class PhysMorphConfig(BaseSettings):
    name: str = "physmorph"
    seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)
    output_dir: str = "runs/default"
    source: ShapeSpec = Field(default_factory=ShapeSpec)
    target: ShapeSpec = Field(
        default_factory=lambda: ShapeSpec(kind=ShapeKind.box, half_extents=(3.2, 3.2, 3.2))
    )
    simulation: SimulationOptions = SimulationOptions()
    bridge: BridgeOptions = BridgeOptions()
    covariance: CovarianceOptions = CovarianceOptions()
    camera: CameraOptions = CameraOptions()
    render: RenderOptions = RenderOptions()
    weights: LossWeights = LossWeights()
    optimization: OptimizationOptions = OptimizationOptions()
    metrics: MetricsOptions = MetricsOptions()

    class Config:
        extra = Extra.forbid
        env_prefix = "PHYSMORPH_"
        json_loads = orjson.loads

    def copy(self: T, *, validate: bool = True, **kwargs: Any) -> T:
        copy = super().copy(**kwargs)
        if validate:
            # pydantic does not validate on copy, so we re-parse the result.
            copy = self.parse_obj(copy.dict())
        return copy

    def to_hash(self) -> str:
        return md5_hash(self.dict())

    def canonical_json(self) -> bytes:
        return orjson_dumps(orjson.loads(self.json()), indent=True)


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _format_validation_error(error: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in err['loc'])}: {err['msg']}" for err in error.errors()
    )


def parse_config(data: Dict[str, Any]) -> PhysMorphConfig:
    try:
        return PhysMorphConfig.parse_obj(data)
    except ValidationError as e:
        raise PhysMorphValidationError(_format_validation_error(e)) from e


def load_physmorph_config(
    config_path: str,
    overrides: Optional[Dict[str, Any]] = None,
    echo: bool = True,
) -> PhysMorphConfig:
    """
    Load the configuration from a JSON file.

    Absent keys take their default value; an empty file gives the full default configuration.

    Args:
        config_path: Path to a json file.
        overrides: Nested values applied on top of the file, e.g. from command line flags.
        echo: Write the resolved config to the output directory.

    Returns:
        The loaded config.

    Raises:
        EnvironmentError if the file does not exist, PhysMorphValidationError if the content is
        not valid.
    """
    log.info("-------------Loading Config--------------")
    if not os.path.isfile(config_path):
        raise EnvironmentError(f"{config_path} does not exists!")

    with open(config_path, "rb") as f:
        content = f.read()
    try:
        data = orjson.loads(content) if content.strip() else {}
    except orjson.JSONDecodeError as e:
        raise PhysMorphValidationError(f"{config_path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise PhysMorphValidationError(f"{config_path} must hold a JSON object.")

    cfg = parse_config(_merge(data, overrides or {}))
    log.info(
        f"Config loaded for {cfg.name}: {cfg.source.kind.value} -> {cfg.target.kind.value}, "
        f"{cfg.simulation.anchor_count} anchors on a {cfg.simulation.grid_resolution}³ grid."
    )
    not_default_config_values = cfg.dict(exclude_defaults=True, exclude={"name"})
    log.info(f"The following additional fields were set: {not_default_config_values}")
    if echo:
        echo_config(cfg)
    log.info("-------------Config loaded--------------")
    return cfg


def save_config(cfg: PhysMorphConfig, path: str) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, "wb") as f:
        f.write(cfg.canonical_json())


def echo_config(cfg: PhysMorphConfig) -> None:
    """Write the resolved config and append it to the config history of the output directory."""
    save_config(cfg, pjoin(cfg.output_dir, CONFIG_ECHO_FILENAME))
    with jsonlines.open(pjoin(cfg.output_dir, CONFIG_HISTORY_FILENAME), mode="a") as writer:
        writer.write(orjson.loads(cfg.json()))
