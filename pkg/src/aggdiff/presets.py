"""Built-in scenario presets.

The six ``fig-*`` presets reproduce the published simulation scenarios: shared
parameters D = 0.25, R = 1.0, indicator initial data of radius ell = 4 and unit
mass, 100 cells per unit length, with the attraction strengths and domain
half-lengths varying per scenario. ``heat`` is a small smooth pure-diffusion
scenario used by the convergence study.
"""
from __future__ import annotations

from .config import RunConfig, config_from_dict

_D = 0.25
_R = 1.0
_ELL = 4.0

# Cross-section times used by the published panels; each preset keeps the ones
# inside its horizon.
_SNAPSHOT_BASE = (0.0, 1.0, 2.7, 10.0, 100.0, 200.0)


def _snaps(t_end: float, extra: tuple = ()) -> list:
    times = sorted(set(s for s in _SNAPSHOT_BASE + extra if 0.0 <= s <= t_end) | {t_end})
    return list(times)


def _scalar(name: str, alpha: float, L: float, t_end: float, extra_snaps: tuple = ()) -> dict:
    return {
        "domain": {"L": L, "cells_per_unit": 100},
        "species": [
            {"D": _D, "initial": {"type": "indicator", "ell": _ELL, "mass": 1.0}}
        ],
        "kernels": {
            "base": {"type": "tophat", "alpha": 1.0, "R": _R},
            "alpha": [[alpha]],
        },
        "time": {"t_end": t_end, "snapshot_times": _snaps(t_end, extra_snaps)},
        "output": {"directory": f"out/{name}"},
    }


def _system(name: str, alpha: list, L: float, t_end: float) -> dict:
    return {
        "domain": {"L": L, "cells_per_unit": 100},
        "species": [
            {"D": _D, "initial": {"type": "indicator", "ell": _ELL, "mass": 1.0}},
            {"D": _D, "initial": {"type": "indicator", "ell": _ELL, "mass": 1.0}},
        ],
        "kernels": {
            "base": {"type": "tophat", "alpha": 1.0, "R": _R},
            "alpha": alpha,
        },
        "time": {"t_end": t_end, "snapshot_times": _snaps(t_end)},
        "output": {"directory": f"out/{name}"},
    }


def _preset_dicts() -> dict:
    return {
        # Weak self-attraction: diffusion dominates, decay to the constant state.
        "fig-scalar1": _scalar("fig-scalar1", 2.0, 12.0, 200.0, extra_snaps=(50.0, 150.0)),
        # Strong self-attraction: single concentration region about x = 0.
        "fig-scalar2": _scalar("fig-scalar2", 30.0, 6.0, 100.0),
        # Intermediate self-attraction: two distinct peaks.
        "fig-scalar3": _scalar("fig-scalar3", 20.0, 12.0, 200.0),
        # Strong self-repulsion: transient patterned state, slow decay.
        "fig-scalar4": _scalar("fig-scalar4", -20.0, 16.0, 200.0, extra_snaps=(5.0, 20.0)),
        # Two species, symmetric repulsive cross-interaction (detailed balance holds).
        "fig-system1": _system("fig-system1", [[20.0, -10.0], [-10.0, 2.0]], 10.0, 100.0),
        # Two species, asymmetric cross-interaction (detailed balance violated).
        "fig-system2": _system("fig-system2", [[20.0, -10.0], [5.0, 20.0]], 10.0, 100.0),
        # Smooth pure-diffusion scenario for the convergence study.
        "heat": {
            "domain": {"L": 4.0, "cells_per_unit": 25},
            "species": [
                {"D": _D, "initial": {"type": "gaussian", "sigma": 0.8, "mass": 1.0}}
            ],
            "time": {"t_end": 0.1, "snapshot_times": [0.0, 0.1]},
            "output": {"directory": "out/heat"},
        },
    }


PRESET_NAMES = tuple(_preset_dicts())


def preset_dict(name: str) -> dict:
    """Raw config mapping for a named preset; raises KeyError on unknown names."""
    table = _preset_dicts()
    if name not in table:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(table)}")
    return table[name]


def preset_config(name: str, **overrides) -> RunConfig:
    """Resolve a preset into a RunConfig.

    overrides may replace t_end, snapshot_times, diagnostic_stride,
    cells_per_unit, or the output directory before validation. Shrinking t_end
    drops snapshot times beyond the new horizon.
    """
    data = preset_dict(name)
    if "t_end" in overrides and overrides["t_end"] is not None:
        t_end = float(overrides["t_end"])
        data["time"]["t_end"] = t_end
        kept = [s for s in data["time"]["snapshot_times"] if s <= t_end]
        data["time"]["snapshot_times"] = sorted(set(kept) | {t_end})
    if overrides.get("snapshot_times") is not None:
        data["time"]["snapshot_times"] = [float(s) for s in overrides["snapshot_times"]]
    if overrides.get("diagnostic_stride") is not None:
        data["time"]["diagnostic_stride"] = int(overrides["diagnostic_stride"])
    if overrides.get("cells_per_unit") is not None:
        data["domain"]["cells_per_unit"] = float(overrides["cells_per_unit"])
    if overrides.get("directory") is not None:
        data["output"]["directory"] = str(overrides["directory"])
    unknown = set(overrides) - {"t_end", "snapshot_times", "diagnostic_stride", "cells_per_unit", "directory"}
    if unknown:
        raise TypeError(f"unknown preset overrides: {sorted(unknown)}")
    return config_from_dict(data)
