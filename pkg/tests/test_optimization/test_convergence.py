"""Desk-scale optimization runs, deselected by default (`pytest -m slow`)."""
import numpy as np
import pytest

from physmorph.config import LossWeights
from physmorph.optimization import Scene, evaluate_state, initial_physics_loss, run_training
from tests.utils import DEPTH_ONLY_CONFIG, HARD_CONFIG, SOFT_CONFIG, config_from_file

NO_RENDER = {"alpha": 0.0, "depth": 0.0, "edge": 0.0, "shrink": 0.0}


@pytest.mark.slow
def test_sphere_to_box_physics_only(desk_config):
    scene = Scene.from_config(desk_config.copy(update={"weights": LossWeights(**NO_RENDER)}))
    start = initial_physics_loss(scene)
    result = run_training(scene, episodes=20)
    assert result.reports[-1].L_physics <= 0.2 * start


@pytest.mark.slow
def test_soft_material_is_more_anisotropic(tmp_path):
    means = {}
    for label, path in (("soft", SOFT_CONFIG), ("hard", HARD_CONFIG)):
        values = []
        for seed in range(3):
            cfg = config_from_file(path, str(tmp_path / f"{label}_{seed}"), seed=seed)
            scene = Scene.from_config(cfg)
            result = run_training(scene, episodes=10)
            _, summary = evaluate_state(
                scene, result.trajectories[-1].final_state, multipliers=result.multipliers
            )
            values.append(summary.anisotropy_mean)
        means[label] = float(np.mean(values))
    assert means["soft"] > means["hard"]


@pytest.mark.slow
def test_depth_supervision_keeps_the_shape(tmp_path):
    depth_cfg = config_from_file(DEPTH_ONLY_CONFIG, str(tmp_path / "depth"))
    physics_cfg = depth_cfg.copy(
        update={"output_dir": str(tmp_path / "physics"), "weights": LossWeights(**NO_RENDER)}
    )
    chamfers, results = {}, {}
    for label, cfg in (("depth", depth_cfg), ("physics", physics_cfg)):
        scene = Scene.from_config(cfg)
        result = run_training(scene, episodes=20)
        row, _ = evaluate_state(
            scene, result.trajectories[-1].final_state, multipliers=result.multipliers
        )
        chamfers[label], results[label] = row.chamfer, result
    assert chamfers["depth"] <= 1.01 * chamfers["physics"]

    render_passes = [r for r in results["depth"].reports if r.pass_index > 1]
    assert render_passes[-1].L_depth <= 0.5 * render_passes[0].L_depth
    assert all(r.projected_cosine >= -1e-12 for r in render_passes)
