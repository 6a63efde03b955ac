"""Read-only access to simulation run directories.

A run directory is the documented file interface of the solver CLI:

    report.json            resolved config, grid, u_ess, snapshot index
    diagnostics.csv        time series (mass, entropy, free energy, ...)
    snapshots/t_<tag>.csv      cell-centre densities, columns x,u1..un
    snapshots/t_<tag>_xi.csv   continuous-flux potential, columns x,xi1..xin

Everything here reads those files; nothing is recomputed from model
parameters and nothing is ever written back.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class RunDataError(Exception):
    """Raised when a run directory is missing, incomplete, or malformed."""


@dataclass(frozen=True)
class Snapshot:
    """Densities and potential at one stored time, as read from disk."""

    t: float
    x: np.ndarray  # cell centres, shape (n_cells,)
    u: np.ndarray  # densities, shape (n_species, n_cells)
    xi: np.ndarray  # potential xi per species, shape (n_species, n_cells)


@dataclass(frozen=True)
class RunData:
    """Everything the renderer needs from one completed run directory."""

    directory: Path
    report: dict
    n_species: int
    u_ess: float
    snapshots: tuple[Snapshot, ...]
    diagnostics: dict[str, np.ndarray]
    balance_flags: tuple[str, ...]

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(s.t for s in self.snapshots)

    def snapshot_at(self, t: float) -> Snapshot:
        """Return the stored snapshot at time t (within 1e-12 relative)."""
        for snap in self.snapshots:
            if snap.t == t or math.isclose(snap.t, t, rel_tol=1e-12, abs_tol=1e-12):
                return snap
        available = ", ".join(f"{s.t:g}" for s in self.snapshots)
        raise RunDataError(
            f"no snapshot at t={t:g} in {self.directory}; available times: {available or 'none'}"
        )


def _read_columns(path: Path, first: str, prefix: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse a snapshot-style CSV: header `first,prefix1..prefixN`, float rows.

    Returns (x, values) with values shaped (N, n_cells).
    """
    if not path.is_file():
        raise RunDataError(f"missing file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RunDataError(f"empty file: {path}") from None
        if len(header) < 2 or header[0] != first:
            raise RunDataError(f"bad header in {path}: expected '{first},{prefix}1,...'")
        for k, name in enumerate(header[1:], start=1):
            if name != f"{prefix}{k}":
                raise RunDataError(f"bad header in {path}: column {k + 1} is '{name}', expected '{prefix}{k}'")
        try:
            rows = [[float(cell) for cell in row] for row in reader if row]
        except ValueError as exc:
            raise RunDataError(f"non-numeric value in {path}: {exc}") from None
    if not rows:
        raise RunDataError(f"no data rows in {path}")
    data = np.asarray(rows, dtype=float)
    if data.shape[1] != len(header):
        raise RunDataError(f"ragged rows in {path}")
    return data[:, 0], data[:, 1:].T.copy()


def _read_diagnostics(path: Path) -> tuple[dict[str, np.ndarray], tuple[str, ...]]:
    if not path.is_file():
        raise RunDataError(f"missing file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RunDataError(f"empty file: {path}") from None
        if not header or header[0] != "t":
            raise RunDataError(f"bad header in {path}: first column must be 't'")
        rows = [row for row in reader if row]
    if not rows:
        raise RunDataError(f"no data rows in {path}")
    flags: tuple[str, ...] = ()
    numeric_names = list(header)
    if header[-1] == "balance_flag":
        numeric_names = header[:-1]
        flags = tuple(row[-1] for row in rows)
    columns: dict[str, np.ndarray] = {}
    for j, name in enumerate(numeric_names):
        try:
            columns[name] = np.array([float(row[j]) for row in rows])
        except (ValueError, IndexError) as exc:
            raise RunDataError(f"bad value in column '{name}' of {path}: {exc}") from None
    return columns, flags


def load_run(run_dir: str | Path) -> RunData:
    """Load a completed run directory, failing fast on any missing file."""
    directory = Path(run_dir)
    if not directory.is_dir():
        raise RunDataError(f"missing run directory: {directory}")
    report_path = directory / "report.json"
    if not report_path.is_file():
        raise RunDataError(f"missing file: {report_path}")
    try:
        with open(report_path, encoding="utf-8") as fh:
            report = json.load(fh)
    except json.JSONDecodeError as exc:
        raise RunDataError(f"unreadable report {report_path}: {exc}") from None

    for key in ("status", "config", "u_ess", "snapshots", "diagnostics_file"):
        if key not in report:
            raise RunDataError(f"report {report_path} lacks required key '{key}'")
    if report["status"] != "completed":
        raise RunDataError(f"run {directory} has status '{report['status']}', expected 'completed'")
    species_cfg = report["config"].get("species")
    if not isinstance(species_cfg, list) or not species_cfg:
        raise RunDataError(f"report {report_path} lacks a species list under config")
    n_species = len(species_cfg)
    u_ess = float(report["u_ess"])

    diagnostics, flags = _read_diagnostics(directory / str(report["diagnostics_file"]))

    snapshots: list[Snapshot] = []
    for entry in report["snapshots"]:
        u_path = directory / str(entry["file"])
        xi_path = directory / str(entry["xi_file"])
        x_u, u = _read_columns(u_path, "x", "u")
        x_xi, xi = _read_columns(xi_path, "x", "xi")
        if u.shape[0] != n_species:
            raise RunDataError(f"{u_path} has {u.shape[0]} species columns, report says {n_species}")
        if xi.shape != u.shape or not np.array_equal(x_u, x_xi):
            raise RunDataError(f"{xi_path} does not match the grid of {u_path}")
        snapshots.append(Snapshot(t=float(entry["t"]), x=x_u, u=u, xi=xi))
    snapshots.sort(key=lambda s: s.t)

    return RunData(
        directory=directory,
        report=report,
        n_species=n_species,
        u_ess=u_ess,
        snapshots=tuple(snapshots),
        diagnostics=diagnostics,
        balance_flags=flags,
    )
