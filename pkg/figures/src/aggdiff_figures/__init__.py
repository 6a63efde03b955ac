"""Batch figure renderer for solver run directories.

Consumes only the solver's documented on-disk formats (report.json,
diagnostics.csv, per-snapshot density and xi CSVs) and produces deterministic
PNG panels: space-time density maps with an energy trace, standalone energy
plots, and per-time cross-sections with essential-support shading.
"""

from __future__ import annotations

from .figspec import FigureSpec, FigureSpecError, Panel, parse_figures, parse_panel
from .loader import RunData, RunDataError, Snapshot, load_run
from .render import (
    DEFAULT_COLORMAP,
    RenderError,
    build_contour_figure,
    build_crosssection_figure,
    build_energy_figure,
    render,
    support_gaps,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_COLORMAP",
    "FigureSpec",
    "FigureSpecError",
    "Panel",
    "RenderError",
    "RunData",
    "RunDataError",
    "Snapshot",
    "__version__",
    "build_contour_figure",
    "build_crosssection_figure",
    "build_energy_figure",
    "load_run",
    "parse_figures",
    "parse_panel",
    "render",
    "support_gaps",
]
