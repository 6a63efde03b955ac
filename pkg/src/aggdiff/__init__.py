"""Finite-volume simulation of 1D aggregation-diffusion systems with bounded kernels.

The package simulates

    du_i/dt = d/dx ( D_i du_i/dx + u_i d/dx sum_l K_il * u_l )

on a symmetric interval with no-flux walls, using a positivity-preserving
upwind finite-volume scheme driven by the potential xi_i = D_i log u_i + sum_l K_il * u_l,
and analyzes interaction kernels for the integrability, regularity, symmetry,
and coupling-compatibility properties that decide which well-posedness and
dissipation statements apply.
"""

__version__ = "0.1.0"

from .grid import (
    CellField,
    Grid1D,
    gaussian_initial_data,
    grid_from_cells_per_unit,
    indicator_initial_data,
    mass,
)
from .kernels import (
    HypothesisReport,
    KernelMatrix,
    Sampled,
    SystemHypothesisReport,
    TopHat,
    analyze,
    analyze_system,
    small_mass_constants,
    solve_detailed_balance,
    tophat,
)
from .scheme import SchemeParams, SystemState, make_state, potential, rhs, velocities
from .timestepping import TimeControls, run, ssp_rk3_step, stable_dt

__all__ = [
    "CellField",
    "Grid1D",
    "HypothesisReport",
    "KernelMatrix",
    "Sampled",
    "SchemeParams",
    "SystemHypothesisReport",
    "SystemState",
    "TimeControls",
    "TopHat",
    "analyze",
    "analyze_system",
    "gaussian_initial_data",
    "grid_from_cells_per_unit",
    "indicator_initial_data",
    "make_state",
    "mass",
    "potential",
    "rhs",
    "run",
    "small_mass_constants",
    "solve_detailed_balance",
    "ssp_rk3_step",
    "stable_dt",
    "tophat",
    "velocities",
]
