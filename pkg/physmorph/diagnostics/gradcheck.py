"""Finite-difference checks of every hand-assembled gradient of the pipeline.

Each suite compares an analytic gradient with central differences on sampled entries and
reports the error relative to the largest gradient magnitude among them.
"""
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import structlog
import torch

from physmorph.bridge.interpolation import build_bridge, scatter_gradients
from physmorph.config import BridgeOptions, LossWeights, PhysMorphConfig, SimulationOptions
from physmorph.linalg import polar_decompose, svd3
from physmorph.mpm.adjoint import AdjointResult, AdjointSeed, adjoint
from physmorph.mpm.engine import geometry_from, measurement_grid, simulate
from physmorph.objectives.physics import TargetMassGrid, physics_loss
from physmorph.objectives.render import render_loss
from physmorph.optimization.chain import chain_render_to_controls, evaluate_render, render_state
from physmorph.optimization.scene import Scene
from physmorph.rendering.covariance import build_covariance, covariance_backward
from physmorph.rendering.splatting import render, render_backward
from physmorph.types import (
    CameraModel,
    ControlField,
    GradcheckResult,
    ParticleState,
    PhysMorphModel,
    RenderGaussians,
)
from physmorph.utils.logs import MultipleExceptions
from physmorph.utils.seeding import make_rng

log = structlog.get_logger(__name__)

GRADCHECK_STREAM = 6
MAGNITUDE_FLOOR = 1e-12

Objective = Callable[[torch.Tensor], float]


def central_difference(
    fn: Objective, x: torch.Tensor, indices: Sequence[int], h: float
) -> torch.Tensor:
    """(f(x + h e_i) - f(x - h e_i)) / 2h for every flat index i."""
    base = x.detach().clone().reshape(-1)
    out = torch.zeros(len(indices), dtype=torch.float64)
    for n, i in enumerate(indices):
        plus, minus = base.clone(), base.clone()
        plus[i] += h
        minus[i] -= h
        out[n] = (fn(plus.reshape(x.shape)) - fn(minus.reshape(x.shape))) / (2.0 * h)
    return out


def relative_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    scale = max(float(analytic.abs().max()), float(numeric.abs().max()), MAGNITUDE_FLOOR)
    return float((analytic - numeric).abs().max()) / scale


def sample_entries(grad: torch.Tensor, count: int, rng: np.random.Generator) -> List[int]:
    """Entries with a non-negligible gradient, all of them when there are too few."""
    flat = grad.detach().reshape(-1).abs()
    informative = np.flatnonzero((flat > 1e-3 * float(flat.max())).numpy()) if flat.numel() else []
    pool = informative if len(informative) else np.arange(flat.numel())
    if len(pool) <= count:
        return [int(i) for i in pool]
    return sorted(int(i) for i in rng.choice(pool, size=count, replace=False))


def _compare(
    name: str,
    analytic: torch.Tensor,
    fn: Objective,
    x: torch.Tensor,
    count: int,
    h: float,
    tolerance: float,
    rng: np.random.Generator,
) -> GradcheckResult:
    indices = sample_entries(analytic, count, rng)
    numeric = central_difference(fn, x, indices, h)
    error = relative_error(analytic.reshape(-1)[indices], numeric)
    log.info(
        "Gradient checked.", suite=name, entries=len(indices), error=error, tolerance=tolerance
    )
    return GradcheckResult(name=name, max_relative_error=error, tolerance=tolerance)


def _random_deformation(rng: np.random.Generator, count: int, spread: float) -> torch.Tensor:
    return torch.eye(3, dtype=torch.float64) + spread * torch.as_tensor(
        rng.normal(size=(count, 3, 3))
    )


def check_svd(rng: np.random.Generator) -> GradcheckResult:
    F = _random_deformation(rng, 4, 0.3)
    w_sigma = torch.as_tensor(rng.normal(size=(4, 3)))
    w_rot = torch.as_tensor(rng.normal(size=(4, 3, 3)))

    # u v^T and sigma are free of the sign ambiguity of the singular vectors.
    def objective(m: torch.Tensor) -> torch.Tensor:
        svd = svd3(m)
        return (w_sigma * svd.sigma).sum() + (w_rot * (svd.u @ svd.v.transpose(-1, -2))).sum()

    leaf = F.clone().requires_grad_(True)
    (analytic,) = torch.autograd.grad(objective(leaf), leaf)
    return _compare(
        "svd_backward", analytic, lambda m: float(objective(m)), F, 20, 1e-6, 1e-5, rng
    )


def check_polar(rng: np.random.Generator) -> GradcheckResult:
    F = _random_deformation(rng, 4, 0.3)
    w_r = torch.as_tensor(rng.normal(size=(4, 3, 3)))
    w_s = torch.as_tensor(rng.normal(size=(4, 3, 3)))

    def objective(m: torch.Tensor) -> torch.Tensor:
        r, s = polar_decompose(m)
        return (w_r * r).sum() + (w_s * s).sum()

    leaf = F.clone().requires_grad_(True)
    (analytic,) = torch.autograd.grad(objective(leaf), leaf)
    return _compare("polar", analytic, lambda m: float(objective(m)), F, 20, 1e-6, 1e-5, rng)


def check_covariance(cfg: PhysMorphConfig, rng: np.random.Generator) -> GradcheckResult:
    F = _random_deformation(rng, 6, 0.2)
    weights = torch.as_tensor(rng.normal(size=(6, 3, 3)))
    scale = cfg.covariance.anchor_scale

    def objective(m: torch.Tensor) -> float:
        return float((weights * build_covariance(m, scale, cfg.covariance)).sum())

    analytic = covariance_backward(F, scale, weights, cfg.covariance)
    return _compare("covariance_backward", analytic, objective, F, 20, 1e-6, 1e-5, rng)


def _lattice_state(params: SimulationOptions, rng: np.random.Generator) -> ParticleState:
    axis = torch.tensor([-0.5, 0.0, 0.5], dtype=torch.float64)
    x = torch.stack(torch.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
    count = x.shape[0]
    x = x + 0.05 * torch.as_tensor(rng.normal(size=(count, 3)))
    return ParticleState(
        x=x,
        v=0.1 * torch.as_tensor(rng.normal(size=(count, 3))),
        C=torch.zeros(count, 3, 3, dtype=torch.float64),
        F=torch.eye(3, dtype=torch.float64).repeat(count, 1, 1),
        mass=torch.full((count,), params.density * 0.125, dtype=torch.float64),
    )


class _MpmProblem(PhysMorphModel):
    params: SimulationOptions
    state0: ParticleState
    controls: ControlField
    target: TargetMassGrid
    weights: LossWeights

    def loss(self, state: ParticleState, values: torch.Tensor) -> float:
        trajectory, _ = simulate(state, ControlField(values=values, stride=1), self.params)
        return physics_loss(trajectory.final_grid.mass, self.target, self.weights).total

    def gradients(self) -> AdjointResult:
        trajectory, tape = simulate(self.state0, self.controls, self.params)
        grad = physics_loss(trajectory.final_grid.mass, self.target, self.weights).grad
        return adjoint(tape, AdjointSeed(final_mass=grad))


def _mpm_problem(cfg: PhysMorphConfig, rng: np.random.Generator) -> _MpmProblem:
    """27 particles on an 8³ grid for 3 steps against a shifted copy of themselves."""
    params = cfg.simulation.copy(
        update={"grid_resolution": 8, "dx": 1.0, "steps": 3, "control_stride": 1}
    )
    state0 = _lattice_state(params, rng)
    shifted = state0.translated(torch.tensor([0.25, 0.0, 0.0], dtype=torch.float64))
    return _MpmProblem(
        params=params,
        state0=state0,
        controls=ControlField(
            values=0.02 * torch.as_tensor(rng.normal(size=(3, state0.count, 3, 3))), stride=1
        ),
        target=TargetMassGrid(mass=measurement_grid(shifted, geometry_from(params)).mass),
        weights=LossWeights(min_mass=0.0),
    )


def check_mpm_adjoint(cfg: PhysMorphConfig, rng: np.random.Generator) -> GradcheckResult:
    problem = _mpm_problem(cfg, rng)
    values = problem.controls.values
    analytic = problem.gradients().controls
    return _compare(
        "mpm_adjoint",
        analytic,
        lambda v: problem.loss(problem.state0, v),
        values,
        20,
        1e-5,
        1e-3,
        rng,
    )


def check_mpm_state0(cfg: PhysMorphConfig, rng: np.random.Generator) -> GradcheckResult:
    """Same run as `check_mpm_adjoint`, gradients on the initial positions and velocities."""
    problem = _mpm_problem(cfg, rng)
    state0, count = problem.state0, problem.state0.count
    result = problem.gradients().state0

    def objective(theta: torch.Tensor) -> float:
        x, v = theta[: count * 3].reshape(count, 3), theta[count * 3 :].reshape(count, 3)
        state = ParticleState(x=x, v=v, C=state0.C, F=state0.F, mass=state0.mass)
        return problem.loss(state, problem.controls.values)

    theta = torch.cat([state0.x.reshape(-1), state0.v.reshape(-1)])
    analytic = torch.cat([result.x.reshape(-1), result.v.reshape(-1)])
    return _compare("mpm_state0", analytic, objective, theta, 20, 1e-5, 1e-3, rng)


def _micro_camera() -> CameraModel:
    return CameraModel(
        fx=20.0,
        fy=20.0,
        cx=7.5,
        cy=7.5,
        width=16,
        height=16,
        near=0.1,
        far=20.0,
        eye=(0.0, -10.0, 0.0),
        target=(0.0, 0.0, 0.0),
    )


def check_renderer(cfg: PhysMorphConfig, rng: np.random.Generator) -> GradcheckResult:
    """Eight Gaussians on a 16x16 image, gradients on means, covariances and opacities."""
    count = 8
    camera = _micro_camera()
    means = torch.as_tensor(rng.uniform(-2.5, 2.5, size=(count, 3)))
    rotations = torch.linalg.qr(torch.as_tensor(rng.normal(size=(count, 3, 3))))[0]
    axes = torch.as_tensor(rng.uniform(0.7, 0.9, size=(count, 3)))
    covariances = rotations @ torch.diag_embed(axes**2) @ rotations.transpose(-1, -2)
    opacities = torch.as_tensor(rng.uniform(0.3, 0.6, size=count))
    w_alpha = torch.as_tensor(rng.normal(size=(16, 16)))
    w_depth = torch.as_tensor(rng.normal(size=(16, 16))) / camera.far
    sizes = [count * 3, count * 9, count]

    def unpack(theta: torch.Tensor) -> RenderGaussians:
        m, c, o = torch.split(theta, sizes)
        return RenderGaussians(
            means=m.reshape(count, 3), covariances=c.reshape(count, 3, 3), opacities=o
        )

    def objective(theta: torch.Tensor) -> float:
        target = render(unpack(theta), camera, cfg.render)
        return float((w_alpha * target.alpha).sum() + (w_depth * target.depth).sum())

    theta = torch.cat([means.reshape(-1), covariances.reshape(-1), opacities])
    grads = render_backward(render(unpack(theta), camera, cfg.render), w_alpha, w_depth)
    analytic = torch.cat(
        [grads.means.reshape(-1), grads.covariances.reshape(-1), grads.opacities]
    )
    return _compare("renderer", analytic, objective, theta, 30, 1e-6, 1e-3, rng)


def check_bridge(rng: np.random.Generator) -> GradcheckResult:
    """Transpose of the bridge on 8 anchors and 16 children."""
    count = 8
    options = BridgeOptions(
        render_samples=24, coarse_neighbors=8, fine_neighbors=4, spacing_neighbors=3
    )
    x = torch.as_tensor(rng.uniform(-1.0, 1.0, size=(count, 3)))
    F = _random_deformation(rng, count, 0.2)
    bridge = build_bridge(x, F, options, rng)
    render_count = bridge.plan.render_count
    w_F = torch.as_tensor(rng.normal(size=(render_count, 3, 3)))
    w_x = torch.as_tensor(rng.normal(size=(render_count, 3)))

    def objective(theta: torch.Tensor) -> float:
        anchors, deformation = theta[: count * 3].reshape(count, 3), theta[count * 3 :]
        blended, _ = bridge.deformation(deformation.reshape(count, 3, 3))
        return float((w_F * blended).sum() + (w_x * bridge.positions(anchors)).sum())

    grad_F, grad_x = scatter_gradients(bridge.footprint, bridge.plan, F, w_F, w_x)
    theta = torch.cat([x.reshape(-1), F.reshape(-1)])
    analytic = torch.cat([grad_x.reshape(-1), grad_F.reshape(-1)])
    return _compare("bridge_scatter", analytic, objective, theta, 30, 1e-6, 1e-5, rng)


def check_losses(cfg: PhysMorphConfig, rng: np.random.Generator) -> GradcheckResult:
    """Alpha, depth and edge terms on a 16x16 image, away from the depth support threshold."""
    shape = (16, 16)
    low = rng.uniform(0.0, 0.4, size=shape)
    alpha = torch.as_tensor(np.where(rng.random(shape) < 0.5, low, low + 0.6))
    target_alpha = torch.as_tensor(np.where(rng.random(shape) < 0.5, low, low + 0.6))
    depth = torch.as_tensor(rng.uniform(5.0, 15.0, size=shape))
    target_depth = torch.as_tensor(rng.uniform(5.0, 15.0, size=shape))
    mask = torch.as_tensor(rng.random(shape) < 0.7)
    weights = cfg.weights.copy(update={"shrink": 0.0})
    multipliers = torch.ones(1, dtype=torch.float64)
    visibility = np.ones(1)
    size = alpha.numel()

    def evaluate(theta: torch.Tensor):
        return render_loss(
            theta[:size].reshape(shape),
            theta[size:].reshape(shape),
            target_alpha,
            target_depth,
            mask,
            multipliers,
            visibility,
            weights,
            cfg.camera.near,
            cfg.camera.far,
            cfg.render.depth_support,
        )

    theta = torch.cat([alpha.reshape(-1), depth.reshape(-1)])
    loss = evaluate(theta)
    analytic = torch.cat([loss.grad_alpha.reshape(-1), loss.grad_depth.reshape(-1)])
    return _compare("losses", analytic, lambda t: evaluate(t).total, theta, 30, 1e-6, 1e-5, rng)


def check_chain(scene: Scene, rng: np.random.Generator) -> GradcheckResult:
    """Render loss of the final state against the controls, bridge and mask frozen.

    The shrink term is left out: it treats visibility as a constant.
    """
    cfg = scene.config.copy(update={"weights": scene.config.weights.copy(update={"shrink": 0.0})})
    scene = scene.copy(update={"config": cfg})
    params = cfg.simulation
    steps = params.steps
    slots = ControlField.slot_count(steps, params.control_stride)
    controls = ControlField(
        values=0.05 * torch.as_tensor(rng.normal(size=(slots, scene.state0.count, 3, 3))),
        stride=params.control_stride,
    )
    multipliers = torch.ones(scene.state0.count, dtype=torch.float64)
    trajectory, tape = simulate(scene.state0, controls, params)
    evaluation = evaluate_render(scene, trajectory.final_state, steps, multipliers, rng)
    bridge, mask = evaluation.rendered.bridge, evaluation.mask
    pixels = torch.as_tensor(mask.pixels)
    analytic = chain_render_to_controls(tape, [evaluation])

    def objective(values: torch.Tensor) -> float:
        run, _ = simulate(scene.state0, ControlField(values=values, stride=controls.stride), params)
        rendered = render_state(scene, run.final_state, multipliers, rng, bridge)
        target = rendered.target
        return render_loss(
            target.alpha.detach(),
            target.depth.detach(),
            scene.target_images.alpha,
            scene.target_images.depth,
            pixels,
            multipliers[bridge.plan.render_parents()],
            target.visibility,
            cfg.weights,
            target.near,
            target.far,
            cfg.render.depth_support,
        ).total

    return _compare("end_to_end", analytic, objective, controls.values, 10, 1e-5, 5e-3, rng)


SUITES = (
    "svd_backward",
    "polar",
    "covariance_backward",
    "mpm_adjoint",
    "mpm_state0",
    "renderer",
    "bridge_scatter",
    "losses",
    "end_to_end",
)


def run_gradcheck(
    cfg: PhysMorphConfig, suites: Optional[Sequence[str]] = None, scene: Optional[Scene] = None
) -> List[GradcheckResult]:
    """Run the requested suites (all by default).

    Raises:
        MultipleExceptions if any suite could not run; the others still run first.
    """
    suites = SUITES if suites is None else suites
    unknown = set(suites) - set(SUITES)
    if unknown:
        raise ValueError(f"Unknown gradcheck suites: {sorted(unknown)}.")
    runners: Dict[str, Callable[[np.random.Generator], GradcheckResult]] = {
        "svd_backward": check_svd,
        "polar": check_polar,
        "covariance_backward": lambda rng: check_covariance(cfg, rng),
        "mpm_adjoint": lambda rng: check_mpm_adjoint(cfg, rng),
        "mpm_state0": lambda rng: check_mpm_state0(cfg, rng),
        "renderer": lambda rng: check_renderer(cfg, rng),
        "bridge_scatter": check_bridge,
        "losses": lambda rng: check_losses(cfg, rng),
        "end_to_end": lambda rng: check_chain(scene or Scene.from_config(cfg), rng),
    }
    results, exceptions = [], []
    for index, name in enumerate(SUITES):
        if name not in suites:
            continue
        try:
            results.append(runners[name](make_rng(cfg.seed, GRADCHECK_STREAM, index)))
        except Exception as e:
            log.error("Gradcheck suite failed to run.", suite=name, error=str(e))
            exceptions.append(e)
    if exceptions:
        raise MultipleExceptions(exceptions=exceptions)
    return results
