"""Render losses and their gradient on the controls.

Render gradients reach the anchors by two paths: covariances through the blended deformation
gradient, and means through the parent positions. Both are seeded into the simulation adjoint
at the state they were rendered from.
"""
from typing import Dict, List, Optional

import numpy as np
import structlog
import torch

from physmorph.bridge.interpolation import Bridge, build_bridge, scatter_gradients
from physmorph.config import PhysMorphConfig
from physmorph.mpm.adjoint import AdjointSeed, adjoint
from physmorph.mpm.engine import Tape
from physmorph.objectives.render import RenderLoss, render_loss
from physmorph.optimization.scene import Scene
from physmorph.rendering.covariance import anisotropy, build_covariance, covariance_backward
from physmorph.rendering.splatting import render, render_backward
from physmorph.rendering.visibility import visibility_mask
from physmorph.types import (
    ParticleGradient,
    ParticleState,
    PhysMorphModel,
    RenderGaussians,
    RenderTarget,
    Tensor,
    VisibilityMask,
)

log = structlog.get_logger(__name__)


class RenderedState(PhysMorphModel):
    """Render particles of one anchor state and their image."""

    bridge: Bridge
    deformation: Tensor
    blend_alpha: Tensor
    scales: Tensor
    covariances: Tensor
    target: RenderTarget

    @property
    def positions(self) -> torch.Tensor:
        return self.target.graph.means.detach()


class RenderEvaluation(PhysMorphModel):
    """Render losses at one timestep, with the adjoint seed and multiplier gradient they give."""

    timestep: int
    rendered: RenderedState
    mask: VisibilityMask
    loss: RenderLoss
    state_grad: ParticleGradient
    multiplier_grad: Tensor


def render_scales(bridge: Bridge, cfg: PhysMorphConfig) -> torch.Tensor:
    plan = bridge.plan
    return torch.cat(
        [
            torch.full((plan.anchor_count,), cfg.covariance.anchor_scale, dtype=torch.float64),
            torch.full((plan.child_count,), cfg.covariance.child_scale, dtype=torch.float64),
        ]
    )


class SplatStatistics(PhysMorphModel):
    """Blend weights and Gaussian shapes of the render particles of one state."""

    alpha_mean: float
    alpha_std: float
    anisotropy_mean: float
    render_count: int

    @classmethod
    def of(
        cls, bridge: Bridge, blend_alpha: torch.Tensor, covariances: torch.Tensor
    ) -> "SplatStatistics":
        empty = blend_alpha.numel() == 0
        return cls(
            alpha_mean=0.0 if empty else float(blend_alpha.mean()),
            alpha_std=0.0 if empty else float(blend_alpha.std(unbiased=False)),
            anisotropy_mean=float(anisotropy(covariances).mean()),
            render_count=bridge.plan.render_count,
        )


def splat_statistics(
    scene: Scene,
    state: ParticleState,
    rng: np.random.Generator,
    bridge: Optional[Bridge] = None,
) -> SplatStatistics:
    """Statistics of the render particles of `state`, without rendering them."""
    cfg = scene.config
    if bridge is None:
        bridge = build_bridge(state.x, state.F, cfg.bridge, rng, cfg.simulation.dx)
    deformation, blend_alpha = bridge.deformation(state.F.detach())
    covariances = build_covariance(deformation, render_scales(bridge, cfg), cfg.covariance)
    return SplatStatistics.of(bridge, blend_alpha, covariances)


def render_state(
    scene: Scene,
    state: ParticleState,
    multipliers: torch.Tensor,
    rng: np.random.Generator,
    bridge: Optional[Bridge] = None,
) -> RenderedState:
    """Upsample the anchors of `state` and render them.

    Args:
        scene: Camera and options.
        state: Anchor state.
        multipliers: Opacity multiplier of every anchor, inherited by its children.
        rng: Source of the child jitter when `bridge` is not given.
        bridge: Frozen bridge to reuse.

    Returns:
        The render particles and their image, with the graph kept for the backward pass.
    """
    cfg = scene.config
    if bridge is None:
        bridge = build_bridge(state.x, state.F, cfg.bridge, rng, cfg.simulation.dx)
    positions = bridge.positions(state.x.detach())
    deformation, blend_alpha = bridge.deformation(state.F.detach())
    scales = render_scales(bridge, cfg)
    covariances = build_covariance(deformation, scales, cfg.covariance)
    parents = bridge.plan.render_parents()
    opacities = cfg.covariance.opacity * multipliers[parents]
    target = render(
        RenderGaussians(means=positions, covariances=covariances, opacities=opacities),
        scene.camera,
        cfg.render,
    )
    return RenderedState(
        bridge=bridge,
        deformation=deformation,
        blend_alpha=blend_alpha,
        scales=scales,
        covariances=covariances,
        target=target,
    )


def evaluate_render(
    scene: Scene,
    state: ParticleState,
    timestep: int,
    multipliers: torch.Tensor,
    rng: np.random.Generator,
    bridge: Optional[Bridge] = None,
    mask: Optional[VisibilityMask] = None,
) -> RenderEvaluation:
    """Render `state`, compare it to the target images and pull the gradients back to anchors.

    Image gradients are restricted to the visibility mask, built from this render unless given.
    """
    cfg = scene.config
    rendered = render_state(scene, state, multipliers, rng, bridge)
    target = rendered.target
    if mask is None:
        mask = visibility_mask(target, cfg.render, rng)
    pixels = torch.as_tensor(mask.pixels)
    parents = rendered.bridge.plan.render_parents()
    loss = render_loss(
        target.alpha.detach(),
        target.depth.detach(),
        scene.target_images.alpha,
        scene.target_images.depth,
        pixels,
        multipliers[parents],
        target.visibility,
        cfg.weights,
        target.near,
        target.far,
        cfg.render.depth_support,
    )
    weight = pixels.to(torch.float64)
    gaussian_grads = render_backward(target, loss.grad_alpha * weight, loss.grad_depth * weight)
    grad_deformation = covariance_backward(
        rendered.deformation, rendered.scales, gaussian_grads.covariances, cfg.covariance
    )
    grad_F, grad_x = scatter_gradients(
        rendered.bridge.footprint,
        rendered.bridge.plan,
        state.F.detach(),
        grad_deformation,
        gaussian_grads.means,
    )
    multiplier_grad = torch.zeros_like(multipliers).index_add(0, parents, loss.grad_multipliers)
    return RenderEvaluation(
        timestep=timestep,
        rendered=rendered,
        mask=mask,
        loss=loss,
        state_grad=ParticleGradient.partial(state, x=grad_x, F=grad_F),
        multiplier_grad=multiplier_grad,
    )


def chain_render_to_controls(tape: Tape, evaluations: List[RenderEvaluation]) -> torch.Tensor:
    """Gradient of the summed render losses on the controls, shaped like the control field."""
    seeds: Dict[int, ParticleGradient] = {}
    for evaluation in evaluations:
        t = evaluation.timestep
        seeds[t] = seeds[t] + evaluation.state_grad if t in seeds else evaluation.state_grad
    return adjoint(tape, AdjointSeed(states=seeds)).controls


def render_timesteps(scene: Scene) -> List[int]:
    steps = scene.config.simulation.steps
    timesteps = scene.config.render.render_timesteps or [steps]
    invalid = [t for t in timesteps if not 0 <= t <= steps]
    if invalid:
        raise ValueError(f"Render timesteps {invalid} are outside [0, {steps}].")
    return sorted(set(timesteps))
