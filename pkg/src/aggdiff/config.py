"""Run configuration: TOML schema, strict validation, and state assembly.

The schema is deliberately rigid: unknown keys are errors and every validation
failure names the offending key (e.g. ``domain.L``), because a silently ignored
typo in a simulation config produces a wrong run, not a crash.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .grid import Grid1D, CellField, gaussian_initial_data, grid_from_cells_per_unit, indicator_initial_data
from .kernels import Kernel, KernelMatrix, sampled_from_csv, tophat
from .scheme import SchemeParams, SystemState, default_u_floor, make_state
from .timestepping import TimeControls


class ConfigError(ValueError):
    """Invalid or missing configuration; the message names the offending key."""


@dataclass(frozen=True)
class InitialSpec:
    """Initial condition for one species: an indicator or gaussian profile."""

    type: str
    mass: float
    ell: float = 0.0
    sigma: float = 0.0
    center: float = 0.0

    def build(self, grid: Grid1D) -> CellField:
        if self.type == "indicator":
            return indicator_initial_data(grid, self.ell, self.mass)
        return gaussian_initial_data(grid, self.sigma, self.mass, self.center)


@dataclass(frozen=True)
class SpeciesConfig:
    D: float
    initial: InitialSpec


@dataclass(frozen=True)
class RunConfig:
    L: float
    cells_per_unit: float
    species: tuple
    kernels: Optional[KernelMatrix]
    theta: float
    cfl: float
    u_floor: Optional[float]
    u_ess: float
    t_end: float
    snapshot_times: tuple
    diagnostic_stride: int
    dt_max: Optional[float]
    output_directory: str
    output_formats: tuple = ("csv",)
    kernel_specs: tuple = ()

    @property
    def n_species(self) -> int:
        return len(self.species)

    def build_grid(self) -> Grid1D:
        return grid_from_cells_per_unit(self.L, self.cells_per_unit)

    def build_state(self, method: str = "auto") -> SystemState:
        grid = self.build_grid()
        fields = [s.initial.build(grid) for s in self.species]
        total = sum(s.initial.mass for s in self.species)
        floor = self.u_floor if self.u_floor is not None else default_u_floor(total, self.L)
        params = SchemeParams(
            D=tuple(s.D for s in self.species), theta=self.theta, u_floor=floor
        )
        return make_state(grid, fields, params, self.kernels, method=method)

    def build_controls(self) -> TimeControls:
        return TimeControls(
            t_end=self.t_end,
            cfl=self.cfl,
            dt_max=self.dt_max,
            snapshot_times=self.snapshot_times,
            diagnostic_stride=self.diagnostic_stride,
        )

    def as_dict(self) -> dict:
        return {
            "domain": {"L": self.L, "cells_per_unit": self.cells_per_unit},
            "species": [
                {
                    "D": s.D,
                    "initial": {
                        k: v
                        for k, v in (
                            ("type", s.initial.type),
                            ("ell", s.initial.ell),
                            ("sigma", s.initial.sigma),
                            ("center", s.initial.center),
                            ("mass", s.initial.mass),
                        )
                        if k in ("type", "mass")
                        or (s.initial.type == "indicator" and k == "ell")
                        or (s.initial.type == "gaussian" and k in ("sigma", "center"))
                    },
                }
                for s in self.species
            ],
            "kernels": [list(row) for row in self.kernel_specs] if self.kernel_specs else None,
            "scheme": {
                "theta": self.theta,
                "cfl": self.cfl,
                "u_floor": self.u_floor,
                "u_ess": self.u_ess,
            },
            "time": {
                "t_end": self.t_end,
                "snapshot_times": list(self.snapshot_times),
                "diagnostic_stride": self.diagnostic_stride,
                "dt_max": self.dt_max,
            },
            "output": {
                "directory": self.output_directory,
                "formats": list(self.output_formats),
            },
        }


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing required key {where}.{key}" if where else f"missing required key {key}")
    return table[key]


def _no_unknown(table: dict, allowed: set, where: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        name = sorted(unknown)[0]
        prefix = f"{where}." if where else ""
        raise ConfigError(f"unknown key {prefix}{name}")


def _real(value, where: str, positive=False, nonnegative=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise ConfigError(f"{where} must be finite, got {value!r}")
    if positive and not x > 0.0:
        raise ConfigError(f"{where} must be positive, got {value!r}")
    if nonnegative and x < 0.0:
        raise ConfigError(f"{where} must be nonnegative, got {value!r}")
    return x


def _parse_kernel_spec(spec: dict, where: str, base_dir: Path) -> tuple[Kernel, dict]:
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be a table, got {spec!r}")
    ktype = _require(spec, "type", where)
    if ktype == "tophat":
        _no_unknown(spec, {"type", "alpha", "R"}, where)
        alpha = _real(_require(spec, "alpha", where), f"{where}.alpha")
        radius = _real(_require(spec, "R", where), f"{where}.R", positive=True)
        return tophat(alpha, radius), {"type": "tophat", "alpha": alpha, "R": radius}
    if ktype == "sampled":
        _no_unknown(spec, {"type", "file"}, where)
        rel = _require(spec, "file", where)
        path = Path(rel)
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"{where}.file does not exist: {path}")
        return sampled_from_csv(path), {"type": "sampled", "file": str(path)}
    raise ConfigError(f"{where}.type must be 'tophat' or 'sampled', got {ktype!r}")


def _parse_initial(spec: dict, where: str) -> InitialSpec:
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be a table, got {spec!r}")
    itype = _require(spec, "type", where)
    if itype == "indicator":
        _no_unknown(spec, {"type", "ell", "mass"}, where)
        return InitialSpec(
            type="indicator",
            ell=_real(_require(spec, "ell", where), f"{where}.ell", positive=True),
            mass=_real(_require(spec, "mass", where), f"{where}.mass", nonnegative=True),
        )
    if itype == "gaussian":
        _no_unknown(spec, {"type", "sigma", "mass", "center"}, where)
        return InitialSpec(
            type="gaussian",
            sigma=_real(_require(spec, "sigma", where), f"{where}.sigma", positive=True),
            mass=_real(_require(spec, "mass", where), f"{where}.mass", nonnegative=True),
            center=_real(spec.get("center", 0.0), f"{where}.center"),
        )
    raise ConfigError(f"{where}.type must be 'indicator' or 'gaussian', got {itype!r}")


def config_from_dict(data: dict, base_dir: Path | str = ".") -> RunConfig:
    """Validate a parsed config mapping and resolve it into a RunConfig."""
    base_dir = Path(base_dir)
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    _no_unknown(data, {"domain", "species", "kernels", "scheme", "time", "output"}, "")

    domain = data.get("domain", {})
    if not isinstance(domain, dict):
        raise ConfigError("domain must be a table")
    _no_unknown(domain, {"L", "cells_per_unit"}, "domain")
    L = _real(_require(domain, "L", "domain"), "domain.L", positive=True)
    cpu = _real(domain.get("cells_per_unit", 100), "domain.cells_per_unit", positive=True)

    species_raw = _require(data, "species", "")
    if not isinstance(species_raw, list) or not species_raw:
        raise ConfigError("species must be a nonempty array of tables")
    species = []
    for idx, entry in enumerate(species_raw):
        where = f"species[{idx}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where} must be a table")
        _no_unknown(entry, {"D", "initial"}, where)
        D = _real(_require(entry, "D", where), f"{where}.D", positive=True)
        initial = _parse_initial(_require(entry, "initial", where), f"{where}.initial")
        species.append(SpeciesConfig(D=D, initial=initial))
    n = len(species)

    kernels = None
    kernel_specs: tuple = ()
    if "kernels" in data:
        ktable = data["kernels"]
        if not isinstance(ktable, dict):
            raise ConfigError("kernels must be a table")
        _no_unknown(ktable, {"base", "alpha", "matrix"}, "kernels")
        if "matrix" in ktable:
            if "base" in ktable or "alpha" in ktable:
                raise ConfigError("kernels.matrix excludes kernels.base/kernels.alpha")
            rows = ktable["matrix"]
            if not isinstance(rows, list) or len(rows) != n or any(
                not isinstance(r, list) or len(r) != n for r in rows
            ):
                raise ConfigError(f"kernels.matrix must be a {n}x{n} array of kernel tables")
            parsed = [
                [_parse_kernel_spec(rows[i][l], f"kernels.matrix[{i}][{l}]", base_dir) for l in range(n)]
                for i in range(n)
            ]
            kernels = KernelMatrix(tuple(tuple(p[0] for p in row) for row in parsed))
            kernel_specs = tuple(tuple(p[1] for p in row) for row in parsed)
        else:
            base, base_spec = _parse_kernel_spec(_require(ktable, "base", "kernels"), "kernels.base", base_dir)
            alpha = _require(ktable, "alpha", "kernels")
            if not isinstance(alpha, list) or len(alpha) != n or any(
                not isinstance(r, list) or len(r) != n for r in alpha
            ):
                raise ConfigError(f"kernels.alpha must be a {n}x{n} array of numbers")
            scale = [[_real(alpha[i][l], f"kernels.alpha[{i}][{l}]") for l in range(n)] for i in range(n)]
            kernels = KernelMatrix.from_scale(base, scale)
            kernel_specs = tuple(
                tuple({"base": base_spec, "scale": scale[i][l]} for l in range(n)) for i in range(n)
            )

    scheme = data.get("scheme", {})
    _no_unknown(scheme, {"theta", "cfl", "u_floor", "u_ess"}, "scheme")
    theta = _real(scheme.get("theta", 2.0), "scheme.theta")
    if not (1.0 <= theta <= 2.0):
        raise ConfigError(f"scheme.theta must lie in [1, 2], got {theta}")
    cfl = _real(scheme.get("cfl", 0.25), "scheme.cfl", positive=True)
    if cfl > 1.0:
        raise ConfigError(f"scheme.cfl must lie in (0, 1], got {cfl}")
    u_floor = None
    if "u_floor" in scheme:
        u_floor = _real(scheme["u_floor"], "scheme.u_floor", positive=True)
    u_ess = _real(scheme.get("u_ess", 1e-4), "scheme.u_ess", positive=True)

    time_table = data.get("time", {})
    if not isinstance(time_table, dict):
        raise ConfigError("time must be a table")
    _no_unknown(time_table, {"t_end", "snapshot_times", "diagnostic_stride", "dt_max"}, "time")
    t_end = _real(_require(time_table, "t_end", "time"), "time.t_end", nonnegative=True)
    snaps_raw = time_table.get("snapshot_times", [])
    if not isinstance(snaps_raw, list):
        raise ConfigError("time.snapshot_times must be an array of numbers")
    snaps = tuple(_real(s, f"time.snapshot_times[{i}]") for i, s in enumerate(snaps_raw))
    for i, s in enumerate(snaps):
        if s < 0.0 or s > t_end:
            raise ConfigError(f"time.snapshot_times[{i}]={s} lies outside [0, t_end={t_end}]")
    stride = time_table.get("diagnostic_stride", 100)
    if isinstance(stride, bool) or not isinstance(stride, int) or stride < 1:
        raise ConfigError(f"time.diagnostic_stride must be a positive integer, got {stride!r}")
    dt_max = None
    if "dt_max" in time_table:
        dt_max = _real(time_table["dt_max"], "time.dt_max", positive=True)

    output = data.get("output", {})
    _no_unknown(output, {"directory", "formats"}, "output")
    directory = output.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        raise ConfigError(f"output.directory must be a nonempty string, got {directory!r}")
    formats_raw = output.get("formats", ["csv"])
    if not isinstance(formats_raw, list) or not formats_raw:
        raise ConfigError("output.formats must be a nonempty array")
    for f in formats_raw:
        if f != "csv":
            raise ConfigError(f"output.formats supports only 'csv', got {f!r}")

    return RunConfig(
        L=L,
        cells_per_unit=cpu,
        species=tuple(species),
        kernels=kernels,
        theta=theta,
        cfl=cfl,
        u_floor=u_floor,
        u_ess=u_ess,
        t_end=t_end,
        snapshot_times=snaps,
        diagnostic_stride=stride,
        dt_max=dt_max,
        output_directory=str(directory),
        output_formats=tuple(formats_raw),
        kernel_specs=kernel_specs,
    )


def load_config(path) -> RunConfig:
    """Parse and validate a TOML config file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}")
    return config_from_dict(data, base_dir=path.parent)
