"""Command-line entry points.

Subcommands: ``validate-map``, ``train-levels``, ``train-classifier``,
``evaluate``, ``online-eval``, ``replay``. Training and evaluation demand
an explicit ``--seed`` (from the flag or the config file); outputs carry
no timestamps, so identical invocations produce identical bytes. Errors
exit nonzero with one machine-parsable line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .classifier import (
    accuracy_at_final,
    classification_rate_curve,
    generate_dataset,
    train_classifier,
)
from .controller import ControllerConfig
from .errors import PegridError
from .evaluation import cross_play
from .logio import deserialize_log
from .persist import RunSettings, load_library, load_model, save_library, save_model
from .render import render_frames, write_frames
from .training import TrainConfig, build_level_library
from .world import load_map


def _load_grid(path: str):
    return load_map(Path(path).read_text())


def _settings(args) -> RunSettings:
    settings = RunSettings.from_file(args.config) if getattr(args, "config", None) else RunSettings()
    return settings


def _require_seed(args, settings: RunSettings) -> int:
    seed = args.seed if args.seed is not None else settings.seed
    if seed is None:
        raise ValueError("a seed is required (--seed or config 'seed')")
    return seed


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def cmd_validate_map(args) -> int:
    grid = _load_grid(args.map)
    print(f"ok: {grid.width}x{grid.height}, {len(grid.accessible)} accessible cells")
    return 0


def cmd_train_levels(args) -> int:
    settings = _settings(args)
    seed = _require_seed(args, settings)
    grid = _load_grid(args.map)
    config = TrainConfig(
        episodes_per_iteration=args.episodes_per_iteration,
        iterations=args.iterations,
        learning_rate=args.learning_rate,
        epsilon_start=args.epsilon_start,
        epsilon_end=args.epsilon_end,
        discount=args.discount,
        evaluation_episodes=args.eval_episodes,
        checkpoint_episodes=args.checkpoint_episodes,
        level0_epsilon=args.level0_epsilon,
        sampler=settings.sampler,
    )
    library = build_level_library(args.levels, grid, settings.reward, config, seed)
    save_library(library, args.out)
    print(f"library written to {args.out} (K={library.K}, seed={seed})")
    return 0


def cmd_train_classifier(args) -> int:
    settings = _settings(args)
    seed = _require_seed(args, settings)
    grid = _load_grid(args.map)
    library = load_library(args.library)
    dataset = generate_dataset(grid, library, args.episodes_per_pair, seed)
    model = train_classifier(dataset)
    save_model(model, args.out)
    acc = model.metadata.get("heldout_accuracy_final")
    print(f"model written to {args.out} (held-out end-of-episode accuracy: {acc:.3f})")
    return 0


def cmd_evaluate(args) -> int:
    settings = _settings(args)
    seed = _require_seed(args, settings)
    grid = _load_grid(args.map)
    library = load_library(args.library)
    matrix = cross_play(grid, library, args.episodes, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "cross_play.json", matrix.to_dict())
    (out / "cross_play.txt").write_text(matrix.text_table())
    print(matrix.text_table(), end="")
    return 0


def cmd_online_eval(args) -> int:
    settings = _settings(args)
    seed = _require_seed(args, settings)
    grid = _load_grid(args.map)
    library = load_library(args.library)
    model = load_model(args.model)
    controller = ControllerConfig(
        theta=args.theta if args.theta is not None else settings.controller.theta,
        dwell=args.dwell if args.dwell is not None else settings.controller.dwell,
        initial_level=settings.controller.initial_level,
    )
    matrix = cross_play(
        grid, library, args.episodes, seed,
        controller_config=controller, model=model, keep_logs=True,
    )
    offline_logs = [log for cell in matrix.logs["offline"].values() for log in cell]
    online_logs = [log for cell in matrix.logs["online"].values() for log in cell]
    offline_curve = classification_rate_curve(model, offline_logs, grid)
    online_curve = classification_rate_curve(model, online_logs, grid)
    offline_acc = accuracy_at_final(model, offline_logs, grid)
    online_acc = accuracy_at_final(model, online_logs, grid)
    shift = {
        "offline_final_accuracy": offline_acc,
        "online_final_accuracy": online_acc,
        "degradation": offline_acc - online_acc,
        "direction": "degraded" if online_acc < offline_acc else "not degraded",
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "cross_play.json", matrix.to_dict())
    (out / "cross_play.txt").write_text(matrix.text_table())
    _write_json(out / "classification_curve_offline.json", offline_curve)
    _write_json(out / "classification_curve_online.json", online_curve)
    _write_json(out / "classifier_shift.json", shift)
    print(matrix.text_table(), end="")
    print(
        f"classifier end-of-episode accuracy: offline {offline_acc:.3f}, "
        f"online {online_acc:.3f} ({shift['direction']})"
    )
    return 0


def cmd_replay(args) -> int:
    grid = _load_grid(args.map)
    log = deserialize_log(Path(args.log).read_text())
    if args.out:
        paths = write_frames(log, grid, args.out, args.format)
        print(f"{len(paths)} frames written to {args.out}")
    else:
        for frame in render_frames(log, grid):
            print(frame)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pegrid",
        description="Occluded-grid pursuit-evasion: train, classify, adapt, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"pegrid {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-map", help="check a map document")
    p.add_argument("map")
    p.set_defaults(func=cmd_validate_map)

    p = sub.add_parser("train-levels", help="build and persist a level library")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON run settings")
    defaults = TrainConfig()
    p.add_argument("--levels", type=int, default=1, help="max level K")
    p.add_argument("--episodes-per-iteration", type=int, default=defaults.episodes_per_iteration)
    p.add_argument("--iterations", type=int, default=defaults.iterations)
    p.add_argument("--learning-rate", type=float, default=defaults.learning_rate)
    p.add_argument("--epsilon-start", type=float, default=defaults.epsilon_start)
    p.add_argument("--epsilon-end", type=float, default=defaults.epsilon_end)
    p.add_argument("--discount", type=float, default=defaults.discount)
    p.add_argument("--eval-episodes", type=int, default=defaults.evaluation_episodes)
    p.add_argument("--checkpoint-episodes", type=int, default=defaults.checkpoint_episodes)
    p.add_argument("--level0-epsilon", type=float, default=defaults.level0_epsilon)
    p.set_defaults(func=cmd_train_levels)

    p = sub.add_parser("train-classifier", help="train the opponent-level classifier")
    p.add_argument("--library", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--episodes-per-pair", type=int, default=100)
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("evaluate", help="offline cross-play matrix")
    p.add_argument("--library", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--episodes", type=int, default=200)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("online-eval", help="adaptive controller evaluation and reports")
    p.add_argument("--library", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--episodes", type=int, default=200)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--dwell", type=int, default=None)
    p.set_defaults(func=cmd_online_eval)

    p = sub.add_parser("replay", help="render an episode log as frames")
    p.add_argument("--log", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--format", choices=("text", "png"), default="text")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_replay)
    return parser


def cli_dispatch(argv=None) -> int:
    """Parse and run one subcommand; returns the process exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PegridError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_dispatch())
