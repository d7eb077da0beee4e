"""Files written by a training run, none of which carries a timestamp."""
import os
from os.path import join as pjoin
from typing import List

import pandas as pd
import structlog
import torch

from physmorph.mpm.engine import Trajectory
from physmorph.optimization.chain import RenderedState, render_state
from physmorph.optimization.scene import Scene
from physmorph.scene.experiment_log import append_rows
from physmorph.scene.images import write_pgm16, write_ppm
from physmorph.scene.snapshot import export_snapshot
from physmorph.types import EpisodeReport
from physmorph.utils.seeding import make_rng

log = structlog.get_logger(__name__)

EPISODE_LOG = "episodes.csv"
EVALUATION_LOG = "evaluation.csv"
FRAMES_FOLDER = "frames"
SNAPSHOTS_FOLDER = "snapshots"
FRAME_STREAM = 4


def snapshot_path(output_dir: str, episode: int) -> str:
    return pjoin(output_dir, SNAPSHOTS_FOLDER, f"episode_{episode:04d}.pmgs")


def write_frames(rendered: RenderedState, prefix: str) -> List[str]:
    """`<prefix>_color.ppm`, `<prefix>_alpha.pgm` and `<prefix>_depth.pgm`."""
    target = rendered.target
    paths = [f"{prefix}_color.ppm", f"{prefix}_alpha.pgm", f"{prefix}_depth.pgm"]
    write_ppm(paths[0], target.color)
    write_pgm16(paths[1], target.alpha.detach().numpy(), 0.0, 1.0)
    write_pgm16(paths[2], target.depth.detach().numpy(), target.near, target.far)
    return paths


def write_episode_artifacts(
    output_dir: str,
    scene: Scene,
    episode: int,
    reports: List[EpisodeReport],
    trajectory: Trajectory,
    multipliers: torch.Tensor,
) -> None:
    append_rows(pjoin(output_dir, EPISODE_LOG), reports)
    state = trajectory.final_state
    rng = make_rng(scene.config.seed, FRAME_STREAM, episode)
    rendered = render_state(scene, state, multipliers, rng)
    write_frames(rendered, pjoin(output_dir, FRAMES_FOLDER, f"episode_{episode:04d}"))
    export_snapshot(state, snapshot_path(output_dir, episode))


def truncate_episode_log(output_dir: str, next_episode: int) -> None:
    """Drop the rows of episodes that have no checkpoint."""
    path = pjoin(output_dir, EPISODE_LOG)
    if not os.path.isfile(path):
        return
    frame = pd.read_csv(path, float_precision="round_trip")
    kept = frame[frame["episode"] < next_episode]
    if len(kept) < len(frame):
        log.info("Episode log truncated.", dropped=len(frame) - len(kept))
        kept.to_csv(path, index=False)
