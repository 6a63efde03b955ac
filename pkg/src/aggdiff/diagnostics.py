"""Functionals of simulation states: mass, entropy, second moment, interaction
energy, free energy, and the flatness of the potential on the essential support.

All integrals are midpoint-rule sums over cell averages. The entropy uses the
convention 0 log 0 = 0 and always sees the true cell values, never the floored
ones the scheme uses inside its logarithm. When no detailed-balance weights are
available the free energy is computed with unit weights and the record carries
balance_flag "violated" so downstream consumers know the quantity is only the
plotted surrogate, not a Lyapunov functional.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, TextIO

import numpy as np
from scipy.signal import find_peaks

from .convolution import convolve
from .grid import CellField
from .scheme import SystemState, potential

U_ESS_DEFAULT = 1e-4


def entropy(field: CellField) -> float:
    """Sum of u log u over cells times dx, with 0 log 0 = 0; rejects negatives."""
    u = field.values
    if np.any(u < 0.0):
        raise ValueError("entropy requires a nonnegative field")
    pos = u > 0.0
    return float(np.sum(u[pos] * np.log(u[pos])) * field.grid.dx)


def second_moment(field: CellField) -> float:
    """Sum of u x^2 over cells times dx."""
    return float(np.sum(field.values * field.grid.centers**2) * field.grid.dx)


def interaction_energy(state: SystemState, weights: Optional[Sequence[float]] = None) -> float:
    """(1/2) sum_{i,l} pi_i sum_j u_i,j (K_il * u_l)_j dx; 0 without kernels."""
    if state.plans is None:
        return 0.0
    n = state.params.n_species
    pi = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    total = 0.0
    for i in range(n):
        acc = np.zeros(state.grid.n_cells)
        for l in range(n):
            acc += convolve(state.plans[i][l], state.field(l)).values
        total += pi[i] * float(np.sum(state.u[i] * acc))
    return 0.5 * total * state.grid.dx


def free_energy(state: SystemState, weights: Optional[Sequence[float]] = None) -> float:
    """sum_i D_i pi_i H[u_i] + interaction energy, unit weights by default."""
    n = state.params.n_species
    pi = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    total = 0.0
    for i in range(n):
        total += state.params.D[i] * pi[i] * entropy(state.field(i))
    return total + interaction_energy(state, weights)


def steadiness(state: SystemState, i: int, u_ess: float = U_ESS_DEFAULT) -> float:
    """Population std of xi_i over cells with u_i > u_ess; +inf if none qualify.

    A numerical steady state has xi constant on the support, so this tends to 0.
    """
    mask = state.u[i] > u_ess
    if not np.any(mask):
        return math.inf
    xi = potential(state, i).values[mask]
    return float(np.std(xi))


def support_measure(field: CellField, u_ess: float = U_ESS_DEFAULT) -> float:
    """Lebesgue measure of {u > u_ess}: dx times the qualifying cell count."""
    return float(np.count_nonzero(field.values > u_ess) * field.grid.dx)


def count_peaks(values: np.ndarray, height: float, prominence_frac: float = 0.05) -> int:
    """Local maxima above `height` with prominence at least prominence_frac*max."""
    values = np.asarray(values, dtype=float)
    mx = float(values.max()) if values.size else 0.0
    if mx <= 0.0:
        return 0
    peaks, _ = find_peaks(values, height=height, prominence=prominence_frac * mx)
    return int(peaks.size)


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of run diagnostics; tuples hold one entry per species."""

    t: float
    dt: float
    mass: tuple
    entropy: tuple
    second_moment: tuple
    max_value: tuple
    support_measure: tuple
    steadiness: tuple
    interaction_energy: float
    free_energy: float
    balance_flag: str

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "dt": self.dt,
            "mass": list(self.mass),
            "entropy": list(self.entropy),
            "second_moment": list(self.second_moment),
            "max_value": list(self.max_value),
            "support_measure": list(self.support_measure),
            "steadiness": list(self.steadiness),
            "interaction_energy": self.interaction_energy,
            "free_energy": self.free_energy,
            "balance_flag": self.balance_flag,
        }


def make_record(
    state: SystemState,
    dt: float,
    weights: Optional[Sequence[float]] = None,
    u_ess: float = U_ESS_DEFAULT,
) -> DiagnosticsRecord:
    """Evaluate every diagnostic on one state.

    weights None means no detailed-balance weights exist: interspecies energies
    use pi = 1 and multi-species records are flagged "violated". Scalar runs
    are trivially balanced, so they stay "ok".
    """
    n = state.params.n_species
    dx = state.grid.dx
    flagged = weights is None and n > 1 and state.kernels is not None
    return DiagnosticsRecord(
        t=state.t,
        dt=dt,
        mass=tuple(float(state.u[i].sum() * dx) for i in range(n)),
        entropy=tuple(entropy(state.field(i)) for i in range(n)),
        second_moment=tuple(second_moment(state.field(i)) for i in range(n)),
        max_value=tuple(float(state.u[i].max()) for i in range(n)),
        support_measure=tuple(support_measure(state.field(i), u_ess) for i in range(n)),
        steadiness=tuple(steadiness(state, i, u_ess) for i in range(n)),
        interaction_energy=interaction_energy(state, weights),
        free_energy=free_energy(state, weights),
        balance_flag="violated" if flagged else "ok",
    )


def csv_header(n_species: int) -> str:
    cols = ["t", "dt"]
    for name in ("mass", "H", "I", "maxu", "steady"):
        cols.extend(f"{name}_{i + 1}" for i in range(n_species))
    cols.extend(["K_energy", "free_energy", "balance_flag"])
    return ",".join(cols)


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return repr(float(x))


def csv_row(record: DiagnosticsRecord) -> str:
    parts = [_fmt(record.t), _fmt(record.dt)]
    for group in (record.mass, record.entropy, record.second_moment,
                  record.max_value, record.steadiness):
        parts.extend(_fmt(v) for v in group)
    parts.append(_fmt(record.interaction_energy))
    parts.append(_fmt(record.free_energy))
    parts.append(record.balance_flag)
    return ",".join(parts)


class DiagnosticsWriter:
    """Streams DiagnosticsRecord rows to an open text file as CSV."""

    def __init__(self, stream: TextIO, n_species: int):
        self._stream = stream
        self._n = n_species
        stream.write(csv_header(n_species) + "\n")

    def write(self, record: DiagnosticsRecord) -> None:
        if len(record.mass) != self._n:
            raise ValueError(f"record has {len(record.mass)} species, writer expects {self._n}")
        self._stream.write(csv_row(record) + "\n")
