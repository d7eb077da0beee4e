"""Command line entry points.

Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error, 3 gradcheck failure.
"""
import argparse
import logging
import os
import sys
from os.path import join as pjoin
from typing import Any, Dict, List, Optional

import structlog
import torch

from physmorph.config import PhysMorphConfig, PhysMorphValidationError, load_physmorph_config
from physmorph.diagnostics import run_gradcheck
from physmorph.optimization import (
    EVALUATION_LOG,
    Scene,
    evaluate_state,
    render_state,
    run_training,
    write_frames,
)
from physmorph.scene import append_rows, import_snapshot, write_pgm16
from physmorph.utils.conversion import orjson_dumps
from physmorph.utils.logs import set_logger_config
from physmorph.utils.parallel import resolve_threads, set_num_threads
from physmorph.utils.seeding import make_rng

log = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_GRADCHECK = 3

RENDER_STREAM = 7


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config_path", help="JSON experiment configuration.")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument(
        "--threads", type=int, default=None, help="Worker threads, PHYSMORPH_THREADS wins."
    )
    parser.add_argument("--out-dir", dest="out_dir", default=None)
    parser.add_argument("--episodes", type=int, default=None)
    parser.add_argument("--resolution-scale", dest="resolution_scale", type=float, default=None)
    parser.add_argument(
        "--log-level", dest="log_level", default="INFO", choices=["DEBUG", "INFO", "WARNING"]
    )


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="physmorph")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Optimize the controls and write every artifact.")
    _add_common(run)
    run.add_argument("--resume", action="store_true", help="Continue from the last checkpoint.")

    evaluate = subparsers.add_parser("eval", help="Chamfer distance and statistics of a snapshot.")
    _add_common(evaluate)
    evaluate.add_argument("snapshot")

    render = subparsers.add_parser("render", help="Render one frame set of a snapshot.")
    _add_common(render)
    render.add_argument("snapshot")

    gradcheck = subparsers.add_parser("gradcheck", help="Finite-difference gradient suites.")
    _add_common(gradcheck)
    gradcheck.add_argument("--suite", action="append", default=None)

    targets = subparsers.add_parser("targets", help="Target mass slices and target images.")
    _add_common(targets)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out_dir is not None:
        overrides["output_dir"] = args.out_dir
    if args.episodes is not None:
        overrides["optimization"] = {"episodes": args.episodes}
    if args.resolution_scale is not None:
        overrides["camera"] = {"resolution_scale": args.resolution_scale}
    return overrides


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def cmd_run(cfg: PhysMorphConfig, args: argparse.Namespace) -> int:
    scene = Scene.from_config(cfg)
    result = run_training(scene, output_dir=cfg.output_dir, resume=args.resume)
    if result.reports:
        last = result.reports[-1]
        log.info("Training done.", episodes=last.episode + 1, L_physics=last.L_physics)
    return EXIT_OK


def cmd_eval(cfg: PhysMorphConfig, args: argparse.Namespace) -> int:
    scene = Scene.from_config(cfg)
    row, summary = evaluate_state(scene, import_snapshot(args.snapshot), args.snapshot)
    append_rows(pjoin(cfg.output_dir, EVALUATION_LOG), [row])
    sys.stdout.write(orjson_dumps(summary.flat_dict(), indent=True).decode() + "\n")
    log.info("Evaluation done.", chamfer=row.chamfer, anisotropy_mean=row.anisotropy_mean)
    return EXIT_OK


def cmd_render(cfg: PhysMorphConfig, args: argparse.Namespace) -> int:
    scene = Scene.from_config(cfg)
    state = import_snapshot(args.snapshot)
    rendered = render_state(
        scene,
        state,
        torch.ones(state.count, dtype=torch.float64),
        make_rng(cfg.seed, RENDER_STREAM),
    )
    paths = write_frames(rendered, pjoin(cfg.output_dir, "render", _stem(args.snapshot)))
    log.info("Frames written.", paths=paths)
    return EXIT_OK


def cmd_gradcheck(cfg: PhysMorphConfig, args: argparse.Namespace) -> int:
    results = run_gradcheck(cfg, args.suite)
    for result in results:
        status = "ok" if result.passed else "FAILED"
        sys.stdout.write(
            f"{result.name:<22} {result.max_relative_error:.3e} "
            f"(tolerance {result.tolerance:.0e}) {status}\n"
        )
    return EXIT_OK if all(result.passed for result in results) else EXIT_GRADCHECK


def cmd_targets(cfg: PhysMorphConfig, args: argparse.Namespace) -> int:
    scene = Scene.from_config(cfg)
    folder = pjoin(cfg.output_dir, "targets")
    volume = scene.target_mass.mass.reshape((cfg.simulation.grid_resolution,) * 3).numpy()
    peak = float(volume.max())
    middle = volume.shape[0] // 2
    for axis, name in enumerate("xyz"):
        write_pgm16(pjoin(folder, f"mass_{name}.pgm"), volume.take(middle, axis=axis), 0.0, peak)
    camera = scene.camera
    write_pgm16(pjoin(folder, "alpha.pgm"), scene.target_images.alpha.numpy(), 0.0, 1.0)
    write_pgm16(
        pjoin(folder, "depth.pgm"), scene.target_images.depth.numpy(), camera.near, camera.far
    )
    log.info("Targets written.", folder=folder)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "eval": cmd_eval,
    "render": cmd_render,
    "gradcheck": cmd_gradcheck,
    "targets": cmd_targets,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG

    set_logger_config(getattr(logging, args.log_level))
    try:
        cfg = load_physmorph_config(args.config_path, _overrides(args))
    except (PhysMorphValidationError, EnvironmentError) as e:
        log.error("Invalid configuration.", error=str(e))
        return EXIT_CONFIG
    set_logger_config(getattr(logging, args.log_level), cfg.output_dir)
    set_num_threads(resolve_threads(args.threads or cfg.threads))

    try:
        return COMMANDS[args.command](cfg, args)
    except Exception as e:
        log.error("Command failed.", command=args.command, error=str(e))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
