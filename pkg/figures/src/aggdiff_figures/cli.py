"""Command line interface: render figures from completed run directories."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .figspec import FigureSpec, FigureSpecError, parse_figures
from .loader import RunDataError, load_run
from .render import RenderError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aggdiff-figures",
        description="Render publication-style figures from solver run directories.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    rend = sub.add_parser("render", help="render panels from one completed run directory")
    rend.add_argument("--run", required=True, help="run directory containing report.json")
    rend.add_argument(
        "--figures",
        required=True,
        nargs="+",
        help="'all' or panel names: contour, energy, crosssection@T (comma or space separated)",
    )
    rend.add_argument("--out", required=True, help="directory to write PNG files into")
    rend.add_argument(
        "--species",
        nargs="+",
        type=int,
        metavar="K",
        help="1-based species selection (default: all species)",
    )
    rend.add_argument("--xlim", nargs=2, type=float, metavar=("LO", "HI"))
    rend.add_argument("--ylim", nargs=2, type=float, metavar=("LO", "HI"))
    return parser


def _cmd_render(args: argparse.Namespace) -> int:
    run = load_run(Path(args.run))
    panels = parse_figures(args.figures, available_times=run.times)
    spec = FigureSpec(
        run_dir=Path(args.run),
        panels=panels,
        out_dir=Path(args.out),
        species=tuple(args.species) if args.species else None,
        xlim=tuple(args.xlim) if args.xlim else None,
        ylim=tuple(args.ylim) if args.ylim else None,
    )
    for path in render(spec, run=run):
        print(path)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _cmd_render(args)
    except (RunDataError, FigureSpecError, RenderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    sys.exit(main())
