"""Multi-pass interleaved optimization of the controls.

Every episode runs `optimization.passes` passes. Each pass simulates the current controls and
back-propagates the physics loss; the first pass steps on that gradient alone, later passes
add the render gradient, projected off the physics gradient when they conflict.
"""
from typing import Dict, List, Optional

import structlog
import torch
from tqdm import tqdm

from physmorph.bridge.interpolation import Bridge
from physmorph.mpm.adjoint import AdjointSeed, adjoint
from physmorph.mpm.engine import Trajectory, simulate
from physmorph.objectives.physics import physics_loss
from physmorph.optimization.artifacts import truncate_episode_log, write_episode_artifacts
from physmorph.optimization.chain import (
    RenderEvaluation,
    SplatStatistics,
    chain_render_to_controls,
    evaluate_render,
    render_timesteps,
    splat_statistics,
)
from physmorph.optimization.checkpoint import (
    TrainingCheckpoint,
    latest_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from physmorph.optimization.fusion import GradientBundle, fuse, pcgrad
from physmorph.optimization.optimizer import ControlOptimizer
from physmorph.optimization.scene import Scene
from physmorph.types import ControlField, EpisodeReport, PhysMorphModel, Tensor
from physmorph.utils.conversion import md5_hash
from physmorph.utils.logs import TimerLogging
from physmorph.utils.seeding import make_rng

log = structlog.get_logger(__name__)

RENDER_STREAM = 3


class PassFailedError(RuntimeError):
    def __init__(self, episode: int, pass_index: int, cause: Exception):
        self.episode = episode
        self.pass_index = pass_index
        self.cause = cause
        super().__init__(
            f"Pass {pass_index} of episode {episode} failed: {type(cause).__name__}: {cause}"
        )


class EpisodeResult(PhysMorphModel):
    episode: int
    reports: List[EpisodeReport]
    controls: ControlField
    trajectory: Trajectory


class TrainingResult(PhysMorphModel):
    controls: ControlField
    reports: List[EpisodeReport]
    multipliers: Tensor
    trajectories: List[Trajectory] = []


def resume_hash(scene: Scene) -> str:
    """Hash of the settings a checkpoint depends on; run length and output folder may change."""
    return md5_hash(
        scene.config.dict(exclude={"output_dir": ..., "threads": ..., "optimization": {"episodes"}})
    )


class Trainer:
    """Owns the controls, Adam moments, opacity multipliers and episode start state of a run.

    Args:
        scene: Initialized scene.
        controls: Initial controls, zero when not given.
    """

    def __init__(self, scene: Scene, controls: Optional[ControlField] = None):
        cfg = scene.config
        self.scene = scene
        self.cfg = cfg
        if controls is None:
            controls = ControlField.zeros(
                cfg.simulation.steps, scene.state0.count, cfg.simulation.control_stride
            )
        self.optimizer = ControlOptimizer(controls, cfg.optimization)
        self.multipliers = torch.ones(scene.state0.count, dtype=torch.float64)
        self.state0 = scene.state0.clone()
        self.episode = 0
        self.reports: List[EpisodeReport] = []
        self._bridges: Dict[int, Bridge] = {}

    @property
    def controls(self) -> ControlField:
        return self.optimizer.controls

    def physics_objective(self, controls: ControlField) -> float:
        trajectory, _ = simulate(self.state0, controls, self.cfg.simulation)
        return physics_loss(
            trajectory.final_grid.mass, self.scene.target_mass, self.cfg.weights
        ).total

    def _render_gradient(self, tape, pass_index: int) -> List[RenderEvaluation]:
        rng = make_rng(self.cfg.seed, RENDER_STREAM, self.episode, pass_index)
        if self.cfg.optimization.refresh_footprint_per_pass:
            self._bridges = {}
        evaluations = []
        for t in render_timesteps(self.scene):
            evaluation = evaluate_render(
                self.scene, tape.states[t], t, self.multipliers, rng, self._bridges.get(t)
            )
            self._bridges[t] = evaluation.rendered.bridge
            evaluations.append(evaluation)
        return evaluations

    def _update_multipliers(self, evaluations: List[RenderEvaluation]) -> None:
        options = self.cfg.render
        grad = torch.stack([e.multiplier_grad for e in evaluations]).sum(0)
        self.multipliers = torch.clamp(
            self.multipliers - options.opacity_lr * grad,
            options.multiplier_min,
            options.multiplier_max,
        )

    def run_pass(self, pass_index: int) -> EpisodeReport:
        cfg = self.cfg
        trajectory, tape = simulate(self.state0, self.optimizer.controls, cfg.simulation)
        physics = physics_loss(trajectory.final_grid.mass, self.scene.target_mass, cfg.weights)
        g_phys = adjoint(tape, AdjointSeed(final_mass=physics.grad)).controls.reshape(-1)
        row = {
            "episode": self.episode,
            "pass_index": pass_index,
            "L_mass": physics.mass,
            "L_min": physics.min_mass,
            "L_physics": physics.total,
            "g_phys_norm": float(g_phys.norm()),
            "anchor_count": self.state0.count,
        }
        render_total = 0.0
        if pass_index > 1 and cfg.weights.render_active:
            evaluations = self._render_gradient(tape, pass_index)
            g_render = chain_render_to_controls(tape, evaluations)
            bundle = GradientBundle.from_controls(g_phys, g_render)
            projected = pcgrad(bundle.g_phys, bundle.g_render)
            direction = fuse(bundle.g_phys, projected)
            self._update_multipliers(evaluations)
            render_total = sum(e.loss.total for e in evaluations)
            last = evaluations[-1]
            rendered = last.rendered
            stats = SplatStatistics.of(rendered.bridge, rendered.blend_alpha, rendered.covariances)
            row.update(
                L_alpha=sum(e.loss.alpha for e in evaluations),
                L_depth=sum(e.loss.depth for e in evaluations),
                L_edge=sum(e.loss.edge for e in evaluations),
                L_shrink=sum(e.loss.shrink for e in evaluations),
                L_render=render_total,
                g_render_norm=float(bundle.g_render.norm()),
                conflict=bundle.conflict,
                pcgrad_cosine=bundle.cosine(),
                projected_cosine=GradientBundle(g_phys=bundle.g_phys, g_render=projected).cosine(),
                visible_count=int(last.mask.visible.sum()),
                mask_ratio=last.mask.ratio,
            )
        else:
            direction = fuse(g_phys, torch.zeros_like(g_phys))
            rng = make_rng(cfg.seed, RENDER_STREAM, self.episode, pass_index)
            stats = splat_statistics(
                self.scene, tape.states[-1], rng, self._bridges.get(cfg.simulation.steps)
            )
        row.update(stats.dict())

        take_step = pass_index > 1 or cfg.optimization.physics_pass_step
        if take_step and bool(direction.any()):
            if cfg.optimization.line_search:
                self.optimizer.step_with_line_search(
                    direction, self.physics_objective, physics.total
                )
            else:
                self.optimizer.step(direction)
        report = EpisodeReport(**row, L_total=physics.total + render_total)
        log.info(
            "Pass done.",
            episode=self.episode,
            pass_index=pass_index,
            L_physics=report.L_physics,
            L_render=report.L_render,
            conflict=report.conflict,
        )
        return report

    def run_episode(self) -> EpisodeResult:
        """Run every pass of the current episode, then move the start state and decay controls."""
        reports = []
        with TimerLogging(f"episode {self.episode}"):
            for pass_index in range(1, self.cfg.optimization.passes + 1):
                try:
                    reports.append(self.run_pass(pass_index))
                except Exception as e:
                    log.error(
                        "Pass failed.", episode=self.episode, pass_index=pass_index, error=str(e)
                    )
                    raise PassFailedError(self.episode, pass_index, e) from e
        controls = self.optimizer.controls
        trajectory, _ = simulate(self.state0, controls, self.cfg.simulation)
        result = EpisodeResult(
            episode=self.episode, reports=reports, controls=controls, trajectory=trajectory
        )
        if self.cfg.optimization.chain_episodes:
            self.state0 = trajectory.final_state.clone()
        self.optimizer.decay(self.cfg.optimization.control_decay)
        self._bridges = {}
        self.reports.extend(reports)
        self.episode += 1
        return result

    def checkpoint(self) -> TrainingCheckpoint:
        return TrainingCheckpoint(
            episode=self.episode - 1,
            optimizer=self.optimizer.state_dict(),
            multipliers=self.multipliers.clone(),
            state0=self.state0.clone(),
            reports=self.reports,
            config_hash=resume_hash(self.scene),
        )

    def restore(self, checkpoint: TrainingCheckpoint) -> None:
        if checkpoint.config_hash != resume_hash(self.scene):
            raise ValueError("The checkpoint was written with a different configuration.")
        self.optimizer.load_state_dict(checkpoint.optimizer)
        self.multipliers = checkpoint.multipliers.clone()
        self.state0 = checkpoint.state0.clone()
        self.reports = list(checkpoint.reports)
        self.episode = checkpoint.episode + 1
        log.info("Training resumed.", episode=self.episode)


def run_training(
    scene: Scene,
    episodes: Optional[int] = None,
    output_dir: Optional[str] = None,
    resume: bool = False,
    controls: Optional[ControlField] = None,
) -> TrainingResult:
    """Run episodes until `episodes` are done, writing artifacts when `output_dir` is set.

    Args:
        scene: Initialized scene.
        episodes: Total episode count, `optimization.episodes` by default.
        output_dir: Folder receiving the episode log, frames, snapshots and checkpoints.
        resume: Continue from the latest checkpoint of `output_dir`.
        controls: Initial controls, zero when not given.

    Returns:
        The controls after the last episode, every report and the episode trajectories.
    """
    episodes = scene.config.optimization.episodes if episodes is None else episodes
    trainer = Trainer(scene, controls)
    if resume:
        if output_dir is None:
            raise ValueError("Resuming requires an output directory.")
        path = latest_checkpoint(output_dir)
        if path is None:
            log.warning("No checkpoint found, starting from scratch.", output_dir=output_dir)
        else:
            trainer.restore(load_checkpoint(path))
        truncate_episode_log(output_dir, trainer.episode)

    trajectories, controls_out = [], trainer.controls
    for _ in tqdm(range(trainer.episode, episodes), desc="Episodes", disable=episodes < 2):
        result = trainer.run_episode()
        trajectories.append(result.trajectory)
        controls_out = result.controls
        if output_dir is not None:
            write_episode_artifacts(
                output_dir,
                scene,
                result.episode,
                result.reports,
                result.trajectory,
                trainer.multipliers,
            )
            save_checkpoint(output_dir, trainer.checkpoint())
    return TrainingResult(
        controls=controls_out,
        reports=trainer.reports,
        multipliers=trainer.multipliers,
        trajectories=trajectories,
    )


def initial_physics_loss(scene: Scene) -> float:
    """Physics loss of the uncontrolled simulation."""
    trainer = Trainer(scene)
    return trainer.physics_objective(trainer.controls)
