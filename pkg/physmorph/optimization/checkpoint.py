"""Per-episode training checkpoints under `<output_dir>/checkpoints`."""
import glob
import os
import re
from os.path import join as pjoin
from typing import Any, Dict, List, Optional

import structlog
import torch
from filelock import FileLock

from physmorph.types import EpisodeReport, ParticleState, PhysMorphModel, Tensor

log = structlog.get_logger(__name__)

CHECKPOINT_FOLDER = "checkpoints"
_CHECKPOINT_PATTERN = re.compile(r"episode_(\d{4,})\.pt$")


class TrainingCheckpoint(PhysMorphModel):
    """State after `episode` completed, ready to start the next one."""

    episode: int
    optimizer: Dict[str, Any]
    multipliers: Tensor
    state0: ParticleState
    reports: List[EpisodeReport] = []
    config_hash: str


def checkpoint_folder(output_dir: str) -> str:
    return pjoin(output_dir, CHECKPOINT_FOLDER)


def checkpoint_path(output_dir: str, episode: int) -> str:
    return pjoin(checkpoint_folder(output_dir), f"episode_{episode:04d}.pt")


def _lock(output_dir: str) -> FileLock:
    return FileLock(pjoin(checkpoint_folder(output_dir), "checkpoint.lock"))


def save_checkpoint(output_dir: str, checkpoint: TrainingCheckpoint) -> str:
    path = checkpoint_path(output_dir, checkpoint.episode)
    os.makedirs(checkpoint_folder(output_dir), exist_ok=True)
    payload = {
        "episode": checkpoint.episode,
        "optimizer": checkpoint.optimizer,
        "multipliers": checkpoint.multipliers,
        "state0": {
            "x": checkpoint.state0.x,
            "v": checkpoint.state0.v,
            "C": checkpoint.state0.C,
            "F": checkpoint.state0.F,
            "mass": checkpoint.state0.mass,
        },
        "reports": [report.dict() for report in checkpoint.reports],
        "config_hash": checkpoint.config_hash,
    }
    with _lock(output_dir):
        torch.save(payload, path)
    log.debug("Checkpoint saved.", path=path)
    return path


def load_checkpoint(path: str) -> TrainingCheckpoint:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"Checkpoint {path} does not exist.")
    with _lock(os.path.dirname(os.path.dirname(path))):
        payload = torch.load(path, weights_only=False)
    return TrainingCheckpoint(
        episode=payload["episode"],
        optimizer=payload["optimizer"],
        multipliers=payload["multipliers"],
        state0=ParticleState(**payload["state0"]),
        reports=[EpisodeReport(**report) for report in payload["reports"]],
        config_hash=payload["config_hash"],
    )


def latest_checkpoint(output_dir: str) -> Optional[str]:
    """Path of the checkpoint with the highest episode, None when there is none."""
    found = []
    for path in glob.glob(pjoin(checkpoint_folder(output_dir), "episode_*.pt")):
        match = _CHECKPOINT_PATTERN.search(path)
        if match:
            found.append((int(match.group(1)), path))
    return max(found)[1] if found else None
