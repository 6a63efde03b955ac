"""Command-line interface.

Subcommands: ``simulate`` (run configs or named presets, optionally as a
parallel sweep), ``analyze-kernel`` (norms and hypothesis flags as JSON),
``check-balance`` (detailed-balance weights or a refusal witness), and
``convergence`` (grid-refinement order study). Exit codes: 0 success, 1
balance violated (check-balance only), 2 invalid configuration or arguments,
3 numerical abort.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .kernels import analyze, sampled_from_csv, small_mass_constants, solve_detailed_balance, tophat
from .presets import PRESET_NAMES, preset_config
from .runner import _jsonable, convergence_study, simulate
from .timestepping import NumericalAbort


def _parse_kernel_arg(text: str):
    """Kernel shorthand: ``tophat:ALPHA,R`` or ``sampled:PATH``."""
    kind, sep, rest = text.partition(":")
    if not sep:
        raise ConfigError(f"kernel spec {text!r} must look like tophat:ALPHA,R or sampled:PATH")
    if kind == "tophat":
        parts = rest.split(",")
        if len(parts) != 2:
            raise ConfigError(f"tophat spec needs ALPHA,R, got {rest!r}")
        try:
            return tophat(float(parts[0]), float(parts[1]))
        except ValueError as exc:
            raise ConfigError(f"bad tophat spec {rest!r}: {exc}")
    if kind == "sampled":
        path = Path(rest)
        if not path.exists():
            raise ConfigError(f"sampled kernel file not found: {path}")
        return sampled_from_csv(path)
    raise ConfigError(f"unknown kernel type {kind!r}; use tophat: or sampled:")


def _load_matrix(path: Path) -> np.ndarray:
    if not path.exists():
        raise ConfigError(f"matrix file not found: {path}")
    if path.suffix.lower() == ".json":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        matrix = np.asarray(data, dtype=float)
    else:
        matrix = np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ConfigError(f"matrix in {path} must be square, got shape {matrix.shape}")
    return matrix


def _apply_overrides(cfg: RunConfig, t_end, snapshots) -> RunConfig:
    if t_end is not None:
        t_end = float(t_end)
        if t_end < 0:
            raise ConfigError(f"--t-end must be nonnegative, got {t_end}")
        snaps = tuple(sorted(set(s for s in cfg.snapshot_times if s <= t_end) | {t_end}))
        cfg = dataclasses.replace(cfg, t_end=t_end, snapshot_times=snaps)
    if snapshots is not None:
        snaps = tuple(float(s) for s in snapshots)
        for s in snaps:
            if s < 0 or s > cfg.t_end:
                raise ConfigError(f"--snapshots value {s} lies outside [0, t_end={cfg.t_end}]")
        cfg = dataclasses.replace(cfg, snapshot_times=snaps)
    return cfg


def _resolve_runs(args) -> list:
    """(label, RunConfig, out_dir) per requested run."""
    runs = []
    many = (len(args.config or []) + len(args.preset or [])) > 1
    for path in args.config or []:
        cfg = load_config(path)
        label = Path(path).stem
        out = None
        if args.out:
            out = str(Path(args.out) / label) if many else args.out
        runs.append((label, _apply_overrides(cfg, args.t_end, args.snapshots), out))
    for name in args.preset or []:
        try:
            cfg = preset_config(name)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0]))
        out = None
        if args.out:
            out = str(Path(args.out) / name) if many else args.out
        runs.append((name, _apply_overrides(cfg, args.t_end, args.snapshots), out))
    if not runs:
        raise ConfigError("simulate needs at least one --config or --preset")
    return runs


def _run_one(task) -> tuple:
    label, cfg, out, progress = task
    try:
        report = simulate(cfg, out_dir=out, progress_every=progress)
    except NumericalAbort as exc:
        return label, 3, f"{exc} (state dump: {getattr(exc, 'dump_path', 'unavailable')})"
    run = report["run"]
    where = out if out is not None else cfg.output_directory
    return label, 0, f"t={run['final_t']:g} steps={run['steps']} wall={run['wall_time']:.1f}s -> {where}"


def _cmd_simulate(args) -> int:
    runs = _resolve_runs(args)
    tasks = [(label, cfg, out, args.progress) for label, cfg, out in runs]
    results = []
    if args.sweep is not None and len(tasks) > 1:
        workers = args.sweep if args.sweep > 0 else None
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        for task in tasks:
            results.append(_run_one(task))
    worst = 0
    for label, code, message in results:
        if code == 0:
            print(f"completed {label}: {message}")
        else:
            print(f"aborted {label}: {message}", file=sys.stderr)
            worst = max(worst, code)
    return worst


def _cmd_analyze_kernel(args) -> int:
    kernel = _parse_kernel_arg(args.kernel)
    report = analyze(kernel, grid_resolution=args.resolution)
    out = report.as_dict()
    if args.mass is not None or args.D is not None:
        if args.mass is None or args.D is None:
            raise ConfigError("--mass and --D must be given together")
        c = small_mass_constants([args.D], [args.mass], [[kernel]])[0]
        out["small_mass"] = {"c": c, "satisfied": c > 0.0}
    json.dump(_jsonable(out), sys.stdout, indent=2)
    print()
    return 0


def _cmd_check_balance(args) -> int:
    matrix = _load_matrix(Path(args.matrix))
    result = solve_detailed_balance(matrix)
    if result.satisfied:
        json.dump(_jsonable({"satisfied": True, "weights": list(result.weights)}), sys.stdout, indent=2)
        print()
        return 0
    json.dump(_jsonable({"satisfied": False, "witness": result.witness.as_dict()}), sys.stdout, indent=2)
    print()
    return 1


def _cmd_convergence(args) -> int:
    try:
        cfg = preset_config(args.preset, t_end=args.t_end)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]))
    result = convergence_study(cfg, levels=args.levels)
    if args.json:
        json.dump(_jsonable(result), sys.stdout, indent=2)
        print()
        return 0
    print(f"{'n_cells':>10} {'dx':>12} {'L1 error':>14} {'order':>8}")
    for k, row in enumerate(result["levels"]):
        err = f"{result['l1_errors'][k - 1]:.6e}" if k >= 1 else ""
        order = f"{result['orders'][k - 2]:.3f}" if k >= 2 else ""
        print(f"{row['n_cells']:>10} {row['dx']:>12.6g} {err:>14} {order:>8}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aggdiff",
        description="Finite-volume solver for nonlocal aggregation-diffusion equations in 1D.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one or more simulations")
    sim.add_argument("--config", action="append", metavar="PATH", help="TOML config file (repeatable)")
    sim.add_argument("--preset", action="append", metavar="NAME",
                     help=f"built-in preset (repeatable): {', '.join(PRESET_NAMES)}")
    sim.add_argument("--out", metavar="DIR", help="output directory (parent directory for multiple runs)")
    sim.add_argument("--t-end", type=float, dest="t_end", help="override the time horizon")
    sim.add_argument("--snapshots", type=float, nargs="+", help="override snapshot times")
    sim.add_argument("--progress", type=int, default=0, metavar="N",
                     help="print a progress line every N steps")
    sim.add_argument("--sweep", type=int, nargs="?", const=0, metavar="WORKERS",
                     help="run multiple configs in a process pool (default: one per CPU)")
    sim.set_defaults(func=_cmd_simulate)

    ak = sub.add_parser("analyze-kernel", help="kernel norms and hypothesis flags as JSON")
    ak.add_argument("--kernel", required=True, help="tophat:ALPHA,R or sampled:PATH")
    ak.add_argument("--mass", type=float, help="species mass for the small-mass constant")
    ak.add_argument("--D", type=float, help="diffusion constant for the small-mass constant")
    ak.add_argument("--resolution", type=float, help="sampling resolution for measured norms")
    ak.set_defaults(func=_cmd_analyze_kernel)

    cb = sub.add_parser("check-balance", help="detailed-balance weights or a violation witness")
    cb.add_argument("--matrix", required=True, help="square coupling matrix (.json or .csv)")
    cb.set_defaults(func=_cmd_check_balance)

    conv = sub.add_parser("convergence", help="grid-refinement self-convergence study")
    conv.add_argument("--preset", required=True, help="scenario preset name")
    conv.add_argument("--levels", type=int, default=3, help="number of resolutions (>= 3)")
    conv.add_argument("--t-end", type=float, dest="t_end", help="override the time horizon")
    conv.add_argument("--json", action="store_true", help="emit the result as JSON")
    conv.set_defaults(func=_cmd_convergence)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalAbort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
