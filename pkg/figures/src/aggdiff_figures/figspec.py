"""Figure requests: which panels to render from a run directory, and where to."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

PANEL_KINDS = ("contour", "energy", "crosssection")


class FigureSpecError(Exception):
    """Raised for malformed panel requests or figure options."""


@dataclass(frozen=True)
class Panel:
    """One requested image: a panel kind plus, for cross-sections, a time."""

    kind: str
    time: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in PANEL_KINDS:
            raise FigureSpecError(
                f"unknown panel kind '{self.kind}'; valid kinds: {', '.join(PANEL_KINDS)}"
            )
        if self.kind == "crosssection":
            if self.time is None:
                raise FigureSpecError("crosssection panels need a time: use crosssection@T")
        elif self.time is not None:
            raise FigureSpecError(f"panel '{self.kind}' does not take a time")

    def label(self) -> str:
        if self.kind == "crosssection":
            return f"crosssection@{self.time:g}"
        return self.kind

    def filename(self) -> str:
        if self.kind == "crosssection":
            return f"crosssection_t{self.time:g}.png"
        return f"{self.kind}.png"


def parse_panel(token: str) -> Panel:
    """Parse a single panel token such as 'contour' or 'crosssection@2.7'."""
    token = token.strip()
    if not token:
        raise FigureSpecError("empty panel name")
    if "@" in token:
        kind, _, raw = token.partition("@")
        try:
            t = float(raw)
        except ValueError:
            raise FigureSpecError(f"bad time '{raw}' in panel '{token}'") from None
        return Panel(kind=kind, time=t)
    return Panel(kind=token)


def parse_figures(tokens: Sequence[str], available_times: Sequence[float]) -> tuple[Panel, ...]:
    """Expand CLI figure tokens into panels.

    Tokens may be comma or space separated.  The single token 'all' expands to
    the contour panel, the energy panel, and one cross-section per stored
    snapshot time.
    """
    flat = [piece for token in tokens for piece in token.split(",") if piece.strip()]
    if not flat:
        raise FigureSpecError("no figures requested")
    if any(piece.strip() == "all" for piece in flat):
        if len(flat) > 1:
            raise FigureSpecError("'all' cannot be combined with explicit panel names")
        panels = [Panel("contour"), Panel("energy")]
        panels.extend(Panel("crosssection", time=float(t)) for t in available_times)
        return tuple(panels)
    return tuple(parse_panel(piece) for piece in flat)


@dataclass(frozen=True)
class FigureSpec:
    """A batch of panels to render from one run directory.

    Cross-section panels must reference snapshot times that exist in the run
    directory; this is enforced at render time against the stored index.
    """

    run_dir: Path
    panels: tuple[Panel, ...]
    out_dir: Path
    species: Optional[tuple[int, ...]] = None  # 1-based selection, None = all
    xlim: Optional[tuple[float, float]] = None
    ylim: Optional[tuple[float, float]] = None
    paths: Optional[tuple[Path, ...]] = None  # explicit output files, aligned with panels

    def __post_init__(self) -> None:
        object.__setattr__(self, "run_dir", Path(self.run_dir))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        object.__setattr__(self, "panels", tuple(self.panels))
        if not self.panels:
            raise FigureSpecError("panel list is empty")
        for panel in self.panels:
            if not isinstance(panel, Panel):
                raise FigureSpecError("panels must be Panel instances")
        if self.species is not None:
            spec = tuple(int(s) for s in self.species)
            if not spec:
                raise FigureSpecError("species selection is empty")
            if any(s < 1 for s in spec):
                raise FigureSpecError("species indices are 1-based and must be positive")
            if len(set(spec)) != len(spec):
                raise FigureSpecError("duplicate species index in selection")
            object.__setattr__(self, "species", spec)
        for name in ("xlim", "ylim"):
            lim = getattr(self, name)
            if lim is not None:
                lo, hi = float(lim[0]), float(lim[1])
                if not lo < hi:
                    raise FigureSpecError(f"{name} must satisfy lo < hi, got ({lo:g}, {hi:g})")
                object.__setattr__(self, name, (lo, hi))
        if self.paths is not None:
            paths = tuple(Path(p) for p in self.paths)
            if len(paths) != len(self.panels):
                raise FigureSpecError(
                    f"got {len(paths)} output paths for {len(self.panels)} panels"
                )
            object.__setattr__(self, "paths", paths)

    def output_paths(self) -> tuple[Path, ...]:
        """Resolved output file per panel: explicit paths, or named in out_dir."""
        if self.paths is not None:
            return tuple(p if p.is_absolute() else self.out_dir / p for p in self.paths)
        return tuple(self.out_dir / panel.filename() for panel in self.panels)
