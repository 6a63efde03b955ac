"""Semi-discrete finite-volume scheme for the aggregation-diffusion system.

Each species carries a potential xi_i = D_i log(u_i) + sum_l K_il * u_l whose
interface differences define advection velocities; the flux is upwind in those
velocities with generalized-minmod-limited interface reconstructions, and the
domain walls are no-flux (boundary fluxes are identically zero). The log is
evaluated on max(u, u_floor) so vacuum cells stay finite; the fields themselves
keep their true values.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .convolution import convolve, plan_convolution
from .grid import CellField, Grid1D
from .kernels import KernelMatrix


@dataclass(frozen=True)
class SchemeParams:
    """Per-species diffusion constants and the shared limiter/floor settings.

    theta in [1, 2] controls the generalized minmod limiter; 2 is the sharpest
    choice that still keeps reconstructed interface values within [0, 2u],
    which is what the positivity proof needs.
    """

    D: tuple
    theta: float = 2.0
    u_floor: float = 1e-12

    def __post_init__(self) -> None:
        object.__setattr__(self, "D", tuple(float(d) for d in self.D))
        if len(self.D) == 0 or any(not (d > 0.0) for d in self.D):
            raise ValueError(f"diffusion constants must be positive, got {self.D}")
        if not (1.0 <= self.theta <= 2.0):
            raise ValueError(f"limiter parameter must lie in [1, 2], got theta={self.theta}")
        if not (0.0 < self.u_floor <= 1e-6):
            raise ValueError(f"u_floor must lie in (0, 1e-6], got {self.u_floor}")

    @property
    def n_species(self) -> int:
        return len(self.D)


def default_u_floor(total_mass: float, L: float) -> float:
    """Floor used inside the log: 1e-12 times the mean density total_mass/(2L)."""
    if total_mass > 0.0:
        return 1e-12 * total_mass / (2.0 * L)
    return 1e-16


@dataclass(frozen=True, eq=False)
class SystemState:
    """Cell averages of all species at one time, plus everything rhs needs."""

    grid: Grid1D
    t: float
    u: np.ndarray
    params: SchemeParams
    kernels: Optional[KernelMatrix]
    plans: Optional[tuple]

    def field(self, i: int) -> CellField:
        return CellField(self.grid, self.u[i])

    @property
    def fields(self) -> tuple:
        return tuple(self.field(i) for i in range(self.u.shape[0]))

    def with_values(self, u: np.ndarray, t: Optional[float] = None) -> "SystemState":
        return replace(self, u=u, t=self.t if t is None else float(t))


def make_state(
    grid: Grid1D,
    fields: Sequence,
    params: SchemeParams,
    kernels: Optional[KernelMatrix] = None,
    t: float = 0.0,
    method: str = "auto",
) -> SystemState:
    """Assemble a state from per-species fields, building convolution plans once."""
    rows = []
    for f in fields:
        values = f.values if isinstance(f, CellField) else np.asarray(f, dtype=float)
        if values.shape != (grid.n_cells,):
            raise ValueError(f"field shape {values.shape} does not match grid with {grid.n_cells} cells")
        rows.append(values.astype(float, copy=True))
    u = np.stack(rows)
    if u.shape[0] != params.n_species:
        raise ValueError(f"got {u.shape[0]} fields for {params.n_species} species")
    plans = None
    if kernels is not None:
        if kernels.n != params.n_species:
            raise ValueError(f"kernel matrix is {kernels.n}x{kernels.n} for {params.n_species} species")
        plans = tuple(
            tuple(plan_convolution(k, grid, method) for k in row) for row in kernels.entries
        )
    return SystemState(grid=grid, t=float(t), u=u, params=params, kernels=kernels, plans=plans)


def potential(state: SystemState, i: int) -> CellField:
    """xi_i = D_i log(max(u_i, u_floor)) + sum_l (K_il * u_l) at cell centers."""
    xi = state.params.D[i] * np.log(np.maximum(state.u[i], state.params.u_floor))
    if state.plans is not None:
        for l in range(state.params.n_species):
            xi = xi + convolve(state.plans[i][l], state.field(l)).values
    return CellField(state.grid, xi)


def velocities(state: SystemState, i: int) -> np.ndarray:
    """Interface velocities v = -dxi/dx; boundary interfaces are 0 (no-flux walls)."""
    xi = potential(state, i).values
    v = np.empty(state.grid.n_cells + 1)
    v[1:-1] = -np.diff(xi) / state.grid.dx
    v[0] = 0.0
    v[-1] = 0.0
    return v


def _minmod3(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    pos = (a > 0.0) & (b > 0.0) & (c > 0.0)
    neg = (a < 0.0) & (b < 0.0) & (c < 0.0)
    smallest = np.minimum(np.minimum(a, b), c)
    largest = np.maximum(np.maximum(a, b), c)
    return np.where(pos, smallest, np.where(neg, largest, 0.0))


def reconstruct_interface_values(field: CellField, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Limited linear reconstruction: (east, west) values of each cell, clipped at 0.

    Interior slopes are the generalized minmod of theta times the one-sided
    differences and the centered difference. Boundary cells use the one-sided
    difference, capped at 2u/dx so the interface values stay within [0, 2u]
    there as well.
    """
    u = field.values
    dx = field.grid.dx
    m = u.size
    s = np.zeros(m)
    d = np.diff(u) / dx
    if m > 2:
        s[1:-1] = _minmod3(theta * d[:-1], (u[2:] - u[:-2]) / (2.0 * dx), theta * d[1:])
    cap0 = 2.0 * u[0] / dx
    s[0] = min(max(d[0], -cap0), cap0)
    cap1 = 2.0 * u[-1] / dx
    s[-1] = min(max(d[-1], -cap1), cap1)
    half = 0.5 * dx * s
    east = np.maximum(u + half, 0.0)
    west = np.maximum(u - half, 0.0)
    return east, west


def rhs(state: SystemState) -> tuple:
    """Flux divergence -dF/dx per species; boundary fluxes are zero, so the
    tendencies telescope to exactly zero total mass change."""
    out = []
    dx = state.grid.dx
    for i in range(state.params.n_species):
        v = velocities(state, i)
        east, west = reconstruct_interface_values(state.field(i), state.params.theta)
        vi = v[1:-1]
        flux = np.where(vi > 0.0, vi * east[:-1], vi * west[1:])
        padded = np.concatenate([[0.0], flux, [0.0]])
        out.append(CellField(state.grid, -np.diff(padded) / dx))
    return tuple(out)


def tendencies(state: SystemState) -> np.ndarray:
    """rhs stacked as an (n_species, n_cells) array."""
    return np.stack([f.values for f in rhs(state)])
