"""Nonlocal convolution K * u of kernels with cell-average fields.

All paths evaluate point values of (K * u)(x_j) at cell centers, treating the
field as piecewise constant and zero outside the domain, so for the stored
representations every path is an exact quadrature and they agree to round-off:

- tophat_exact: windowed cumulative mass via prefix sums, O(n);
- direct: overlap-integrated kernel weights, O(n * w);
- spectral: the same weights applied through a zero-padded FFT, O(n log n).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.fft import next_fast_len

from .grid import CellField, Grid1D
from .kernels import Kernel, Sampled, TopHat, primitive, support_radius

# Widest direct stencil before the planner switches to the FFT path.
_DIRECT_WIDTH_LIMIT = 129


class ConvolutionMethod(Enum):
    TOPHAT_EXACT = "tophat_exact"
    DIRECT = "direct"
    SPECTRAL = "spectral"


@dataclass(frozen=True, eq=False)
class ConvolutionPlan:
    """Grid-specific precomputation for one kernel.

    For tophat_exact: idx_offset_* and frac_* locate the window endpoints
    x_j +- R inside the prefix-sum array (the fractional parts are the same
    for every j on a uniform grid). For direct/spectral: weights[i] is the
    integral of the kernel over the offset window ((m_lo+i)*dx - dx/2,
    (m_lo+i)*dx + dx/2), and spectral additionally carries its transform.
    """

    method: ConvolutionMethod
    kernel: Kernel
    grid: Grid1D
    idx_offset_lo: int = 0
    idx_offset_hi: int = 0
    frac_lo: float = 0.0
    frac_hi: float = 0.0
    weights: Optional[np.ndarray] = None
    m_lo: int = 0
    fft_length: int = 0
    weights_hat: Optional[np.ndarray] = None


def _overlap_weights(kernel: Kernel, dx: float) -> tuple[np.ndarray, int]:
    if isinstance(kernel, TopHat):
        s_lo, s_hi = -kernel.R, kernel.R
    else:
        s_lo = kernel.x0
        s_hi = kernel.x0 + kernel.values.size * kernel.dx
    m_lo = int(math.floor(s_lo / dx - 0.5))
    m_hi = int(math.ceil(s_hi / dx + 0.5))
    offsets = np.arange(m_lo, m_hi + 1)
    w = primitive(kernel, offsets * dx + dx / 2.0) - primitive(kernel, offsets * dx - dx / 2.0)
    nonzero = np.nonzero(w)[0]
    if nonzero.size == 0:
        return np.zeros(1), 0
    w = w[nonzero[0] : nonzero[-1] + 1]
    return w, m_lo + int(nonzero[0])


def plan_convolution(kernel: Kernel, grid: Grid1D, method: str = "auto") -> ConvolutionPlan:
    """Build an evaluation plan for this kernel on this grid.

    method: "auto" picks tophat_exact for top-hat kernels and direct/spectral
    for sampled ones by stencil width; or force one of the ConvolutionMethod values.
    """
    if method == "auto":
        if isinstance(kernel, TopHat):
            chosen = ConvolutionMethod.TOPHAT_EXACT
        else:
            w, _ = _overlap_weights(kernel, grid.dx)
            chosen = (
                ConvolutionMethod.DIRECT if w.size <= _DIRECT_WIDTH_LIMIT else ConvolutionMethod.SPECTRAL
            )
    else:
        chosen = ConvolutionMethod(method)

    if chosen is ConvolutionMethod.TOPHAT_EXACT:
        if not isinstance(kernel, TopHat):
            raise ValueError("tophat_exact plan requires a top-hat kernel")
        shift = kernel.R / grid.dx
        c_hi = 0.5 + shift
        c_lo = 0.5 - shift
        return ConvolutionPlan(
            method=chosen,
            kernel=kernel,
            grid=grid,
            idx_offset_lo=int(math.floor(c_lo)),
            idx_offset_hi=int(math.floor(c_hi)),
            frac_lo=c_lo - math.floor(c_lo),
            frac_hi=c_hi - math.floor(c_hi),
        )

    weights, m_lo = _overlap_weights(kernel, grid.dx)
    if chosen is ConvolutionMethod.DIRECT:
        return ConvolutionPlan(method=chosen, kernel=kernel, grid=grid, weights=weights, m_lo=m_lo)
    nf = next_fast_len(grid.n_cells + weights.size - 1)
    return ConvolutionPlan(
        method=chosen,
        kernel=kernel,
        grid=grid,
        weights=weights,
        m_lo=m_lo,
        fft_length=nf,
        weights_hat=np.fft.rfft(weights, nf),
    )


def _prefix_lookup(cums: np.ndarray, values: np.ndarray, dx: float, idx: np.ndarray, frac: float) -> np.ndarray:
    """Cumulative mass up to position (idx + frac) cells from the left edge, zero-extended."""
    m = values.size
    base = cums[np.clip(idx, 0, m)]
    base = np.where(idx < 0, 0.0, base)
    inside = (idx >= 0) & (idx < m)
    fr = np.where(inside, frac * values[np.clip(idx, 0, m - 1)] * dx, 0.0)
    return base + fr


def convolve(plan: ConvolutionPlan, field: CellField) -> CellField:
    """Point values of (K * u) at cell centers, with u extended by zero outside the domain."""
    if field.grid != plan.grid:
        raise ValueError("field grid does not match the plan grid")
    v = field.values
    grid = plan.grid
    m = grid.n_cells

    if plan.method is ConvolutionMethod.TOPHAT_EXACT:
        kernel = plan.kernel
        cums = np.concatenate([[0.0], np.cumsum(v)]) * grid.dx
        j = np.arange(m)
        hi = _prefix_lookup(cums, v, grid.dx, j + plan.idx_offset_hi, plan.frac_hi)
        lo = _prefix_lookup(cums, v, grid.dx, j + plan.idx_offset_lo, plan.frac_lo)
        scale = -kernel.alpha / (2.0 * kernel.R)
        return CellField(grid, scale * (hi - lo))

    if plan.method is ConvolutionMethod.DIRECT:
        full = np.convolve(v, plan.weights)
    else:
        full = np.fft.irfft(np.fft.rfft(v, plan.fft_length) * plan.weights_hat, plan.fft_length)
        full = full[: m + plan.weights.size - 1]
    idx = np.arange(m) - plan.m_lo
    valid = (idx >= 0) & (idx < full.size)
    out = np.where(valid, full[np.clip(idx, 0, full.size - 1)], 0.0)
    return CellField(grid, out)


def grad_convolve_at_interfaces(plan: ConvolutionPlan, field: CellField) -> np.ndarray:
    """d/dx (K * u) at the n_cells + 1 cell interfaces; boundary interfaces report 0.

    For the top-hat kernel the derivative identity
    d/dx (K * u)(x) = -alpha * (u(x + R) - u(x - R)) / (2R) is evaluated on the
    piecewise-linear reconstruction of the cell averages (zero outside the
    domain); general kernels use two-point differences of the center values.
    """
    if field.grid != plan.grid:
        raise ValueError("field grid does not match the plan grid")
    grid = plan.grid
    out = np.empty(grid.n_cells + 1)

    if plan.method is ConvolutionMethod.TOPHAT_EXACT:
        kernel = plan.kernel
        nodes = np.concatenate([[-grid.L], grid.centers, [grid.L]])
        vals = np.concatenate([[0.0], field.values, [0.0]])
        x = grid.edges
        hi = np.interp(x + kernel.R, nodes, vals, left=0.0, right=0.0)
        lo = np.interp(x - kernel.R, nodes, vals, left=0.0, right=0.0)
        out[:] = -kernel.alpha * (hi - lo) / (2.0 * kernel.R)
    else:
        conv = convolve(plan, field).values
        out[1:-1] = np.diff(conv) / grid.dx
    out[0] = 0.0
    out[-1] = 0.0
    return out
