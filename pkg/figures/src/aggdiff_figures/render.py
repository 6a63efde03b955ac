"""Deterministic matplotlib rendering of run-directory panels.

Three panel kinds are produced from a loaded run:

  contour        smooth space-time density map per species (Gouraud-shaded
                 between stored snapshot times) with a free-energy trace
                 underneath
  energy         standalone free energy vs time from diagnostics.csv
  crosssection   density (solid) and |xi| (dashed, read from the per-snapshot
                 xi CSV, never recomputed) at one stored time, one row per
                 species, with grey columns over cells where u < u_ess

Determinism: figures are built without pyplot, all fonts/sizes/colormaps are
pinned locally via rc_context, and the PNG 'Software' metadata chunk is
suppressed, so re-rendering the same run produces byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from matplotlib import rc_context
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .figspec import FigureSpec
from .loader import RunData, Snapshot, load_run

DEFAULT_COLORMAP = "viridis"  # density maps; chosen default, see README
SUPPORT_GREY = "0.85"  # columns where u < u_ess
DENSITY_COLOR = "#1f77b4"
POTENTIAL_COLOR = "#d62728"
ENERGY_COLOR = "#2ca02c"

_FIG_WIDTH = 6.4
_SAVE_DPI = 150
_PNG_METADATA = {"Software": None}  # drop the version chunk for byte-stable output

_RC_PARAMS = {
    "font.family": "DejaVu Sans",
    "font.size": 9.0,
    "mathtext.fontset": "dejavusans",
    "axes.titlesize": 10.0,
    "axes.labelsize": 9.0,
    "xtick.labelsize": 8.0,
    "ytick.labelsize": 8.0,
    "legend.fontsize": 8.0,
    "lines.linewidth": 1.4,
    "figure.dpi": 100.0,
}


class RenderError(Exception):
    """Raised when a figure request cannot be rendered from the run data."""


def support_gaps(x: np.ndarray, u_row: np.ndarray, u_ess: float) -> list[tuple[float, float]]:
    """Cell-edge intervals covering every contiguous run of cells with u < u_ess."""
    x = np.asarray(x, dtype=float)
    u_row = np.asarray(u_row, dtype=float)
    if x.ndim != 1 or u_row.shape != x.shape:
        raise ValueError("x and u_row must be 1-D arrays of equal length")
    if x.size == 0:
        return []
    half = 0.5 * (x[1] - x[0]) if x.size > 1 else 0.0
    below = np.flatnonzero(u_row < u_ess)
    if below.size == 0:
        return []
    groups = np.split(below, np.flatnonzero(np.diff(below) > 1) + 1)
    return [(float(x[g[0]] - half), float(x[g[-1]] + half)) for g in groups]


def _resolve_species(selection: Optional[Sequence[int]], n_species: int) -> tuple[int, ...]:
    """Map a 1-based species selection to 0-based indices, defaulting to all."""
    if selection is None:
        return tuple(range(n_species))
    out = []
    for s in selection:
        if not 1 <= s <= n_species:
            raise RenderError(f"species index {s} out of range; run has {n_species} species")
        out.append(s - 1)
    return tuple(out)


def _energy_series(run: RunData) -> tuple[np.ndarray, np.ndarray]:
    for key in ("t", "free_energy"):
        if key not in run.diagnostics:
            raise RenderError(f"diagnostics of {run.directory} lack column '{key}'")
    return run.diagnostics["t"], run.diagnostics["free_energy"]


def _plot_energy(ax, run: RunData) -> None:
    t, f = _energy_series(run)
    line = ax.plot(t, f, color=ENERGY_COLOR)[0]
    line.set_gid("free-energy")
    ax.set_xlabel("$t$")
    ax.set_ylabel("free energy")
    ax.grid(True, alpha=0.3)


def build_energy_figure(run: RunData) -> Figure:
    """Standalone free-energy-vs-time panel from diagnostics.csv."""
    fig = Figure(figsize=(5.6, 3.4), layout="constrained")
    FigureCanvasAgg(fig)
    _plot_energy(fig.add_subplot(1, 1, 1), run)
    return fig


def build_contour_figure(
    run: RunData,
    species: Optional[Sequence[int]] = None,
    xlim: Optional[tuple[float, float]] = None,
) -> Figure:
    """Space-time density map per selected species plus a free-energy trace."""
    if len(run.snapshots) < 2:
        raise RenderError(
            f"contour panel needs at least 2 snapshots, run {run.directory} has {len(run.snapshots)}"
        )
    idx = _resolve_species(species, run.n_species)
    times = np.array(run.times)
    x = run.snapshots[0].x
    n_rows = len(idx)
    fig = Figure(figsize=(_FIG_WIDTH, 2.4 * n_rows + 1.6), layout="constrained")
    FigureCanvasAgg(fig)
    grid = fig.add_gridspec(n_rows + 1, 1, height_ratios=[2.2] * n_rows + [1.0])
    for row, i in enumerate(idx):
        ax = fig.add_subplot(grid[row, 0])
        field = np.vstack([snap.u[i] for snap in run.snapshots])
        mesh = ax.pcolormesh(x, times, field, cmap=DEFAULT_COLORMAP, shading="gouraud")
        mesh.set_gid(f"density-map-{i + 1}")
        fig.colorbar(mesh, ax=ax, label=f"$u_{{{i + 1}}}$")
        ax.set_ylabel("$t$")
        if row == n_rows - 1:
            ax.set_xlabel("$x$")
        if xlim is not None:
            ax.set_xlim(*xlim)
    _plot_energy(fig.add_subplot(grid[n_rows, 0]), run)
    return fig


def build_crosssection_figure(
    run: RunData,
    t: float,
    species: Optional[Sequence[int]] = None,
    xlim: Optional[tuple[float, float]] = None,
    ylim: Optional[tuple[float, float]] = None,
) -> Figure:
    """Density and |xi| at one stored time, one row per selected species.

    The dashed |xi| curve comes straight from the snapshot's xi CSV; grey
    columns cover exactly the cells where the stored density is below u_ess.
    """
    snap: Snapshot = run.snapshot_at(t)
    idx = _resolve_species(species, run.n_species)
    n_rows = len(idx)
    fig = Figure(figsize=(_FIG_WIDTH, 2.3 * n_rows), layout="constrained")
    FigureCanvasAgg(fig)
    axes = fig.subplots(n_rows, 1, squeeze=False, sharex=True)
    for row, i in enumerate(idx):
        ax = axes[row][0]
        for lo, hi in support_gaps(snap.x, snap.u[i], run.u_ess):
            span = ax.axvspan(lo, hi, color=SUPPORT_GREY, linewidth=0, zorder=0)
            span.set_gid("support-gap")
        u_line = ax.plot(snap.x, snap.u[i], color=DENSITY_COLOR, linestyle="-")[0]
        u_line.set_gid(f"density-{i + 1}")
        ax.set_ylabel(f"$u_{{{i + 1}}}$", color=DENSITY_COLOR)
        ax.tick_params(axis="y", labelcolor=DENSITY_COLOR)
        twin = ax.twinx()
        xi_line = twin.plot(snap.x, np.abs(snap.xi[i]), color=POTENTIAL_COLOR, linestyle="--")[0]
        xi_line.set_gid(f"potential-{i + 1}")
        twin.set_ylabel(f"$|\\xi_{{{i + 1}}}|$", color=POTENTIAL_COLOR)
        twin.tick_params(axis="y", labelcolor=POTENTIAL_COLOR)
        if xlim is not None:
            ax.set_xlim(*xlim)
        if ylim is not None:
            ax.set_ylim(*ylim)
        if row == 0:
            ax.set_title(f"$t = {t:g}$")
        if row == n_rows - 1:
            ax.set_xlabel("$x$")
    return fig


def _build_panel(run: RunData, spec: FigureSpec, panel) -> Figure:
    if panel.kind == "contour":
        return build_contour_figure(run, species=spec.species, xlim=spec.xlim)
    if panel.kind == "energy":
        return build_energy_figure(run)
    return build_crosssection_figure(
        run, panel.time, species=spec.species, xlim=spec.xlim, ylim=spec.ylim
    )


def render(spec: FigureSpec, run: Optional[RunData] = None) -> tuple[Path, ...]:
    """Render every panel in the spec to PNG files and return the paths written."""
    if run is None:
        run = load_run(spec.run_dir)
    if not run.snapshots:
        raise RenderError(f"run directory {run.directory} contains no snapshots")
    for panel in spec.panels:
        if panel.kind == "crosssection":
            run.snapshot_at(panel.time)  # enforce: referenced times must exist
    _resolve_species(spec.species, run.n_species)
    paths = spec.output_paths()
    for path in paths:
        if path.suffix != ".png":
            raise RenderError(f"only .png output is supported, got {path}")
    written = []
    with rc_context(_RC_PARAMS):
        for panel, path in zip(spec.panels, paths):
            fig = _build_panel(run, spec, panel)
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="png", dpi=_SAVE_DPI, metadata=dict(_PNG_METADATA))
            written.append(path)
    return tuple(written)
