"""Command-line entry point: ``quantavg {run,bound,replay,gen-graph}``."""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .experiments import PRESETS, ConfigError, ExperimentConfig, load_preset, run_experiment, with_overrides
from .graph import four_node_digraph, random_strongly_connected
from .metrics import dynamic_walk_bound, k0_bound, y_init
from .protocol import Variant
from .randomness import ReplayMismatch, ScriptedSource, SeededSource
from .simulation import run_trial

WORKED_Y0 = (5, 3, 7, 2)

# Hand-worked table, snapshots k = 0 and k = 1: per node (y, z, y_s, z_s, q_s)
WORKED_TABLE = {
    0: [(10, 2, 10, 2, 5), (6, 2, 6, 2, 3), (14, 2, 14, 2, 7), (4, 2, 4, 2, 2)],
    1: [(12, 2, 12, 2, 6), (11, 3, 11, 3, 3), (9, 2, 9, 2, 4), (2, 1, 2, 1, 2)],
}


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_preset(args.preset) if args.preset else ExperimentConfig.load(args.config)
        cfg = with_overrides(cfg, seed=args.seed, trials=args.trials, parallelism=args.parallelism)
        result = run_experiment(cfg, Path(args.out) if args.out else None)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(result.summary, indent=2))
    if result.all_converged or args.allow_nonconverged:
        return 0
    return 1


def _cmd_bound(args: argparse.Namespace) -> int:
    if args.y0 is not None:
        yi = y_init(args.y0)
        n = len(args.y0)
    else:
        if args.n is None or args.y_init is None:
            print("error: give --y0, or both --n and --y-init", file=sys.stderr)
            return 2
        yi, n = args.y_init, args.n
    try:
        k0 = k0_bound(n, args.d_plus_max, yi, args.p0, args.window_l)
        walk = dynamic_walk_bound(n, args.d_plus_max, args.window_l)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({
        "n": n, "d_plus_max": args.d_plus_max, "y_init": yi, "p0": args.p0,
        "window_l": args.window_l, "k0": k0, "walk_bound": f"{walk.numerator}/{walk.denominator}",
    }))
    return 0


def replay_worked_example(script_path: Optional[str] = None, seed: int = 0, max_rounds: int = 400):
    """Replay the four-node worked example; returns ``(record, mismatches)``."""
    if script_path is None:
        ref = resources.files("quantavg") / "presets" / "example1_script.json"
        with resources.as_file(ref) as p:
            source = ScriptedSource.load(p, SeededSource(seed))
    else:
        source = ScriptedSource.load(script_path, SeededSource(seed))
    rec = run_trial(four_node_digraph(), WORKED_Y0, Variant.NO_OSCILLATION, source, max_rounds=max_rounds,
                    require_absorbed=True)
    mismatches = []
    for k, rows in WORKED_TABLE.items():
        for j, want in enumerate(rows):
            got = (int(rec.y[k, j]), int(rec.z[k, j]), int(rec.y_s[k, j]), int(rec.z_s[k, j]), int(rec.q[k, j]))
            if got != want:
                mismatches.append((k, j, want, got))
    return rec, mismatches


def _cmd_replay(args: argparse.Namespace) -> int:
    try:
        rec, mismatches = replay_worked_example(args.script, args.seed or 0)
    except (ReplayMismatch, ValueError) as exc:
        print(f"replay failed: {exc}", file=sys.stderr)
        return 1
    for k in WORKED_TABLE:
        for j in range(4):
            print(f"k={k} v{j + 1}: (y, z, y_s, z_s, q_s) = "
                  f"({rec.y[k, j]}, {rec.z[k, j]}, {rec.y_s[k, j]}, {rec.z_s[k, j]}, {rec.q[k, j]})")
    final = rec.q[-1].tolist()
    print(f"final q_s = {final} after {rec.rounds} rounds; converged = {rec.converged}")
    for k, j, want, got in mismatches:
        print(f"MISMATCH k={k} v{j + 1}: expected {want}, got {got}", file=sys.stderr)
    return 0 if not mismatches and (rec.converged or args.allow_nonconverged) else 1


def _cmd_gen_graph(args: argparse.Namespace) -> int:
    try:
        g = random_strongly_connected(args.n, args.density, args.seed or 0)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = g.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quantavg", description="Finite-time quantized average consensus simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config or a preset")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("config", nargs="?", help="path to an experiment config")
    src.add_argument("--preset", choices=PRESETS)
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--parallelism", type=int)
    run.add_argument("--out", help="directory for trials.csv and summary.json")
    run.add_argument("--allow-nonconverged", action="store_true")
    run.set_defaults(func=_cmd_run)

    bound = sub.add_parser("bound", help="evaluate the fixation-time bound k0")
    bound.add_argument("--n", type=int)
    bound.add_argument("--y-init", type=int)
    bound.add_argument("--y0", type=int, nargs="+", help="initial states; n and y_init are derived")
    bound.add_argument("--d-plus-max", type=int, required=True)
    bound.add_argument("--p0", type=float, default=0.9)
    bound.add_argument("--window-l", type=int, default=1)
    bound.set_defaults(func=_cmd_bound)

    replay = sub.add_parser("replay", help="check the scripted four-node example against its table")
    replay.add_argument("--script", help="JSON list of {k, node, piece, target} choices")
    replay.add_argument("--seed", type=int, help="seed for draws the script does not cover")
    replay.add_argument("--allow-nonconverged", action="store_true")
    replay.set_defaults(func=_cmd_replay)

    gen = sub.add_parser("gen-graph", help="emit a random strongly connected digraph as JSON")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--density", type=float, default=0.2)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out")
    gen.set_defaults(func=_cmd_gen_graph)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
