"""Simulation orchestration: output layout, report assembly, and the
self-convergence study.

A run directory contains ``snapshots/t_<value>.csv`` (cell-center densities),
``snapshots/t_<value>_xi.csv`` (the potential xi per species, emitted so
downstream tools never recompute numerics), ``diagnostics.csv``, and
``report.json`` with the resolved config, the kernel hypothesis report, and the
run accounting. On a numerical abort the offending state is dumped next to the
outputs and the report records the failure.
"""
from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import RunConfig
from .diagnostics import DiagnosticsWriter, make_record
from .grid import CellField
from .kernels import analyze_system
from .scheme import SystemState, potential
from .timestepping import NumericalAbort, RunReport, TimeControls, run


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _fmt17(x: float) -> str:
    return f"{x:.17g}"


def write_snapshot_csv(path, state: SystemState) -> None:
    """Cell-center densities: header x,u1[,u2,...], 17-significant-digit floats."""
    n = state.params.n_species
    header = "x," + ",".join(f"u{i + 1}" for i in range(n))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for j, x in enumerate(state.grid.centers):
            row = [_fmt17(float(x))] + [_fmt17(float(state.u[i, j])) for i in range(n)]
            fh.write(",".join(row) + "\n")


def write_potential_csv(path, state: SystemState) -> None:
    """Potentials xi_i = D_i log u_i + sum_l K_il * u_l: header x,xi1[,xi2,...]."""
    n = state.params.n_species
    xi = [potential(state, i).values for i in range(n)]
    header = "x," + ",".join(f"xi{i + 1}" for i in range(n))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for j, x in enumerate(state.grid.centers):
            row = [_fmt17(float(x))] + [_fmt17(float(xi[i][j])) for i in range(n)]
            fh.write(",".join(row) + "\n")


def _time_tag(t: float) -> str:
    return f"{t:g}"


def simulate(
    config: RunConfig,
    out_dir: Optional[str] = None,
    progress_every: int = 0,
    method: str = "auto",
) -> dict:
    """Run one configured simulation, writing the full run directory.

    Returns the report dict (also written to report.json). NumericalAbort
    propagates to the caller after the state dump and failure report are
    written; the exception gains a ``dump_path`` attribute.
    """
    out = Path(out_dir if out_dir is not None else config.output_directory)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)

    state = config.build_state(method=method)
    controls = config.build_controls()
    if progress_every:
        controls = dataclasses.replace(controls, progress_every=int(progress_every))

    hypotheses = None
    weights = None
    if config.kernels is not None:
        masses = tuple(s.initial.mass for s in config.species)
        D = tuple(s.D for s in config.species)
        hypotheses = analyze_system(config.kernels, D=D, masses=masses)
        if hypotheses.detailed_balance.satisfied:
            weights = hypotheses.detailed_balance.weights

    snapshots_written = []

    def on_snapshot(s: SystemState) -> None:
        tag = _time_tag(s.t)
        upath = snap_dir / f"t_{tag}.csv"
        xpath = snap_dir / f"t_{tag}_xi.csv"
        write_snapshot_csv(upath, s)
        write_potential_csv(xpath, s)
        snapshots_written.append(
            {"t": s.t, "file": f"snapshots/t_{tag}.csv", "xi_file": f"snapshots/t_{tag}_xi.csv"}
        )

    def base_report(status: str, run_report: Optional[RunReport]) -> dict:
        grid = state.grid
        return {
            "version": __version__,
            "status": status,
            "config": config.as_dict(),
            "grid": {"L": config.L, "n_cells": grid.n_cells, "dx": grid.dx},
            "u_ess": config.u_ess,
            "hypotheses": hypotheses.as_dict() if hypotheses is not None else None,
            "balance_weights": list(weights) if weights is not None else None,
            "run": run_report.as_dict() if run_report is not None else None,
            "snapshots": snapshots_written,
            "diagnostics_file": "diagnostics.csv",
        }

    def write_report(report: dict) -> None:
        with open(out / "report.json", "w", encoding="utf-8") as fh:
            json.dump(_jsonable(report), fh, indent=2)
            fh.write("\n")

    with open(out / "diagnostics.csv", "w") as diag_stream:
        writer = DiagnosticsWriter(diag_stream, config.n_species)

        def on_diagnostics(s: SystemState, dt: float, steps: int) -> None:
            writer.write(make_record(s, dt, weights=weights, u_ess=config.u_ess))

        try:
            final_state, run_report = run(
                state, controls, on_snapshot=on_snapshot, on_diagnostics=on_diagnostics
            )
        except NumericalAbort as exc:
            dump_path = out / "abort_state.csv"
            if exc.state is not None:
                write_snapshot_csv(dump_path, exc.state)
            report = base_report("aborted", exc.report)
            report["abort"] = {"message": str(exc), "state_dump": dump_path.name}
            write_report(report)
            exc.dump_path = str(dump_path)
            raise

    report = base_report("completed", run_report)
    write_report(report)
    return report


def coarsen_pairwise(values: np.ndarray) -> np.ndarray:
    """Project a fine field onto the 2x-coarser grid by averaging cell pairs."""
    if values.size % 2:
        raise ValueError("pairwise coarsening needs an even cell count")
    return 0.5 * (values[0::2] + values[1::2])


def convergence_study(config: RunConfig, levels: int = 3) -> dict:
    """L1 self-convergence under grid refinement (cells doubled per level).

    Runs the scenario at `levels` resolutions, coarsens each finer solution
    onto the next-coarser grid, and reports the L1 differences and the observed
    orders log2(e_k / e_{k+1}). Needs levels >= 3 for at least one order.
    """
    if levels < 3:
        raise ValueError(f"need at least 3 refinement levels, got {levels}")
    resolutions = [config.cells_per_unit * 2**k for k in range(levels)]
    finals = []
    rows = []
    for cpu in resolutions:
        cfg = dataclasses.replace(config, cells_per_unit=cpu, snapshot_times=())
        state = cfg.build_state()
        final, _ = run(state, cfg.build_controls())
        finals.append(final)
        rows.append({"cells_per_unit": cpu, "n_cells": final.grid.n_cells, "dx": final.grid.dx})

    errors = []
    for coarse, fine in zip(finals[:-1], finals[1:]):
        dx = coarse.grid.dx
        err = 0.0
        for i in range(coarse.params.n_species):
            err += float(np.sum(np.abs(coarse.u[i] - coarsen_pairwise(fine.u[i]))) * dx)
        errors.append(err)
    orders = [
        math.log2(e0 / e1) if e1 > 0 and e0 > 0 else math.inf
        for e0, e1 in zip(errors[:-1], errors[1:])
    ]
    return {"levels": rows, "l1_errors": errors, "orders": orders}
