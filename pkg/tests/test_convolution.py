"""Discrete convolution plans: exact window path, direct overlap weights,
spectral path, and interface gradients."""
from __future__ import annotations

import numpy as np
import pytest

from aggdiff.convolution import (
    ConvolutionMethod,
    convolve,
    grad_convolve_at_interfaces,
    plan_convolution,
)
from aggdiff.grid import CellField, Grid1D, grid_from_cells_per_unit, indicator_initial_data
from aggdiff.kernels import Sampled, primitive, tophat


def _convolution_oracle(kernel, grid, values):
    """O(N^2) quadrature oracle: (K*u)(x_j) = sum_l u_l [P(x_j - e_l) - P(x_j - e_{l+1})]
    with P the kernel antiderivative, exact for piecewise-constant fields."""
    edges = grid.edges
    out = np.zeros(grid.n_cells)
    for j, x in enumerate(grid.centers):
        prim = primitive(kernel, x - edges)
        out[j] = float(np.sum(values * (prim[:-1] - prim[1:])))
    return out


def test_tophat_exact_matches_quadrature_oracle():
    g = grid_from_cells_per_unit(12.0, 25)
    u = indicator_initial_data(g, 4.0, 1.0)
    k = tophat(2.0, 1.0)
    plan = plan_convolution(k, g, "tophat_exact")
    result = convolve(plan, u).values
    # Center value: -alpha/(2R) times the mass within radius 1 of x=0.
    j0 = np.argmin(np.abs(g.centers))
    assert result[j0] == pytest.approx(-0.25, abs=1e-12)
    oracle = _convolution_oracle(k, g, u.values)
    np.testing.assert_allclose(result, oracle, atol=1e-13)


def test_direct_matches_quadrature_oracle_small_grid():
    g = Grid1D(3.0, 120)
    rng = np.random.default_rng(5)
    vals = rng.uniform(0.0, 2.0, size=g.n_cells)
    u = CellField(g, vals)
    k = tophat(1.5, 0.73)
    plan = plan_convolution(k, g, "direct")
    assert plan.method == ConvolutionMethod.DIRECT
    result = convolve(plan, u).values
    oracle = _convolution_oracle(k, g, vals)
    np.testing.assert_allclose(result, oracle, atol=1e-13)


def test_sampled_kernel_direct_matches_oracle():
    g = Grid1D(2.0, 80)
    rng = np.random.default_rng(9)
    vals = rng.uniform(0.0, 1.0, size=g.n_cells)
    u = CellField(g, vals)
    k = Sampled(np.array([0.2, -1.0, 0.4, -1.0, 0.2]), g.dx, -2.5 * g.dx)
    plan = plan_convolution(k, g, "direct")
    result = convolve(plan, u).values
    oracle = _convolution_oracle(k, g, vals)
    np.testing.assert_allclose(result, oracle, atol=1e-13)


def test_three_methods_agree_random_offsets():
    rng = np.random.default_rng(21)
    g = Grid1D(4.0, 320)
    for _ in range(5):
        alpha = rng.uniform(-25.0, 25.0)
        # Radii that are not multiples of dx exercise the fractional windows.
        R = rng.uniform(0.11, 1.7)
        k = tophat(alpha, R)
        vals = rng.uniform(0.0, 3.0, size=g.n_cells)
        u = CellField(g, vals)
        exact = convolve(plan_convolution(k, g, "tophat_exact"), u).values
        direct = convolve(plan_convolution(k, g, "direct"), u).values
        spectral = convolve(plan_convolution(k, g, "spectral"), u).values
        scale = max(1.0, np.max(np.abs(direct)))
        assert np.max(np.abs(exact - direct)) < 1e-12 * scale
        assert np.max(np.abs(spectral - direct)) < 1e-10 * scale


def test_auto_method_selection():
    g = Grid1D(6.0, 600)
    assert plan_convolution(tophat(1.0, 1.0), g, "auto").method == ConvolutionMethod.TOPHAT_EXACT
    narrow = Sampled(np.ones(5), g.dx, -2.5 * g.dx)
    assert plan_convolution(narrow, g, "auto").method == ConvolutionMethod.DIRECT
    wide = Sampled(np.ones(401), g.dx, -200.5 * g.dx)
    assert plan_convolution(wide, g, "auto").method == ConvolutionMethod.SPECTRAL


def test_constant_field_interior_plateau():
    # K * c = -alpha c wherever the window lies inside the domain.
    g = grid_from_cells_per_unit(6.0, 100)
    c = 0.7
    u = CellField(g, np.full(g.n_cells, c))
    k = tophat(3.0, 1.0)
    result = convolve(plan_convolution(k, g, "tophat_exact"), u).values
    interior = np.abs(g.centers) <= 6.0 - 1.0 - g.dx
    np.testing.assert_allclose(result[interior], -3.0 * c, atol=1e-13)


def test_zero_strength_kernel():
    g = Grid1D(2.0, 40)
    u = CellField(g, np.ones(40))
    result = convolve(plan_convolution(tophat(0.0, 1.0), g, "tophat_exact"), u).values
    np.testing.assert_allclose(result, 0.0)


def test_interface_gradient_tophat_identity():
    # d(K*u)/dx = -alpha (u(x+R) - u(x-R)) / (2R) for the exact window path.
    g = grid_from_cells_per_unit(12.0, 100)
    u = indicator_initial_data(g, 4.0, 1.0)
    k = tophat(2.0, 1.0)
    plan = plan_convolution(k, g, "tophat_exact")
    grad = grad_convolve_at_interfaces(plan, u)
    assert grad.size == g.n_cells + 1
    assert grad[0] == 0.0
    assert grad[-1] == 0.0
    j = np.argmin(np.abs(g.edges - 3.5))
    # u(4.5) = 0, u(2.5) = 1/8: gradient is -2 (0 - 1/8) / 2 = 0.125.
    assert grad[j] == pytest.approx(0.125, abs=1e-10)
    j_flat = np.argmin(np.abs(g.edges - 0.0))
    assert grad[j_flat] == pytest.approx(0.0, abs=1e-12)


def test_interface_gradient_general_path_consistent():
    g = Grid1D(3.0, 300)
    rng = np.random.default_rng(13)
    vals = rng.uniform(0.0, 1.0, size=g.n_cells)
    u = CellField(g, vals)
    k = Sampled(np.array([0.1, 0.4, 0.1]), g.dx, -1.5 * g.dx)
    plan = plan_convolution(k, g, "direct")
    grad = grad_convolve_at_interfaces(plan, u)
    conv = convolve(plan, u).values
    np.testing.assert_allclose(grad[1:-1], np.diff(conv) / g.dx, atol=1e-12)
    assert grad[0] == 0.0 and grad[-1] == 0.0


def test_interface_gradient_smooth_field_accuracy():
    # For a smooth field the discrete interface gradient converges (second
    # order) to the continuum d(K*u)/dx = -alpha (u(x+R) - u(x-R)) / (2R).
    # R is chosen so the sample points x +- R stay away from grid nodes at
    # both resolutions; otherwise alignment accidents mask the trend.
    R = 0.497
    k = tophat(2.0, R)
    errs = []
    for n in (150, 600):
        g = Grid1D(4.0, n)
        dens = np.exp(-g.centers**2)
        u = CellField(g, dens)
        plan = plan_convolution(k, g, "tophat_exact")
        grad = grad_convolve_at_interfaces(plan, u)
        x = g.edges[1:-1]
        exact = -2.0 * (np.exp(-((x + R) ** 2)) - np.exp(-((x - R) ** 2))) / (2.0 * R)
        errs.append(np.max(np.abs(grad[1:-1] - exact)))
    assert errs[1] < errs[0] / 8.0


def test_plan_rejects_unknown_method():
    g = Grid1D(1.0, 10)
    with pytest.raises(ValueError):
        plan_convolution(tophat(1.0, 1.0), g, "fft")
