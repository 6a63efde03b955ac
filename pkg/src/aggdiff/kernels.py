"""Interaction kernels and their analysis.

Kernels are bounded, integrable functions of the offset x - y. Two concrete
representations are supported: the closed-form top-hat kernel and a sampled
kernel given by cell averages on its own uniform grid. ``analyze`` measures the
norms and structural properties that the solver's applicability flags are built
from; ``solve_detailed_balance`` decides whether a coupling matrix admits
positive weights pi with pi_i * a_ij = pi_j * a_ji.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.fft import next_fast_len
from scipy.signal import fftconvolve

# Relative tolerance for detailed-balance verification on non-tree edges.
BALANCE_RTOL = 1e-12


@dataclass(frozen=True)
class TopHat:
    """Top-hat kernel: constant value -alpha/(2R) on (-R, R), zero outside.

    alpha > 0 is attractive, alpha < 0 repulsive. The kernel integrates to
    -alpha and has total variation |alpha|/R (two jumps of size |alpha|/(2R)).
    """

    alpha: float
    R: float

    def __post_init__(self) -> None:
        if not (self.R > 0.0) or not math.isfinite(self.R):
            raise ValueError(f"top-hat radius must be positive, got R={self.R}")
        if not math.isfinite(self.alpha):
            raise ValueError(f"top-hat strength must be finite, got alpha={self.alpha}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        val = np.where(np.abs(x) < self.R, -self.alpha / (2.0 * self.R), 0.0)
        return val if val.ndim else float(val)


@dataclass(frozen=True, eq=False)
class Sampled:
    """Kernel given by cell averages on a uniform grid of width dx starting at x0."""

    values: np.ndarray
    dx: float
    x0: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("sampled kernel needs a nonempty 1D value array")
        if not (self.dx > 0.0):
            raise ValueError(f"sample spacing must be positive, got dx={self.dx}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sampled kernel contains non-finite values")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.floor((x - self.x0) / self.dx).astype(int)
        inside = (idx >= 0) & (idx < self.values.size)
        val = np.where(inside, self.values[np.clip(idx, 0, self.values.size - 1)], 0.0)
        return val if val.ndim else float(val)


Kernel = Union[TopHat, Sampled]


def tophat(alpha: float, R: float) -> TopHat:
    """Build the top-hat kernel with strength alpha and radius R > 0."""
    return TopHat(float(alpha), float(R))


def sampled_from_csv(path) -> Sampled:
    """Read a sampled kernel from a two-column CSV of (cell center, cell average)."""
    xs, vs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() in ("x", "#"):
                continue
            xs.append(float(row[0]))
            vs.append(float(row[1]))
    if len(xs) < 2:
        raise ValueError(f"sampled kernel file {path} needs at least two rows")
    x = np.asarray(xs)
    steps = np.diff(x)
    dx = float(steps[0])
    if dx <= 0 or not np.allclose(steps, dx, rtol=1e-9, atol=1e-12 * abs(dx)):
        raise ValueError(f"sampled kernel file {path} is not on a uniform grid")
    return Sampled(np.asarray(vs), dx, float(x[0]) - dx / 2.0)


# ---------------------------------------------------------------------------
# Norms and structural properties


def linf_norm(kernel: Kernel) -> float:
    if isinstance(kernel, TopHat):
        return abs(kernel.alpha) / (2.0 * kernel.R)
    return float(np.max(np.abs(kernel.values)))


def l1_norm(kernel: Kernel) -> float:
    if isinstance(kernel, TopHat):
        return abs(kernel.alpha)
    return float(np.sum(np.abs(kernel.values)) * kernel.dx)


def tv_norm(kernel: Kernel) -> float:
    """Total variation, counting the jumps to zero at the ends of the support."""
    if isinstance(kernel, TopHat):
        return abs(kernel.alpha) / kernel.R
    v = kernel.values
    return float(abs(v[0]) + np.sum(np.abs(np.diff(v))) + abs(v[-1]))


def support_radius(kernel: Kernel) -> float:
    """Radius of the smallest symmetric interval containing the support."""
    if isinstance(kernel, TopHat):
        return kernel.R
    v = kernel.values
    nonzero = np.nonzero(v)[0]
    if nonzero.size == 0:
        return 0.0
    left = kernel.x0 + nonzero[0] * kernel.dx
    right = kernel.x0 + (nonzero[-1] + 1) * kernel.dx
    return float(max(abs(left), abs(right)))


def is_symmetric(kernel: Kernel, rtol: float = 1e-12) -> bool:
    """True when the kernel is even about the origin (within rtol for samples)."""
    if isinstance(kernel, TopHat):
        return True
    v = kernel.values
    extent = kernel.values.size * kernel.dx
    centered = abs(kernel.x0 + (kernel.x0 + extent)) <= 1e-9 * extent
    if not centered:
        return False
    scale = float(np.max(np.abs(v)))
    if scale == 0.0:
        return True
    return bool(np.max(np.abs(v - v[::-1])) <= rtol * scale)


def primitive(kernel: Kernel, x) -> np.ndarray:
    """Antiderivative P(x) = integral of the kernel over (-inf, x]."""
    x = np.asarray(x, dtype=float)
    if isinstance(kernel, TopHat):
        return -kernel.alpha / (2.0 * kernel.R) * (np.clip(x, -kernel.R, kernel.R) + kernel.R)
    edges = kernel.x0 + np.arange(kernel.values.size + 1) * kernel.dx
    cums = np.concatenate([[0.0], np.cumsum(kernel.values) * kernel.dx])
    return np.interp(x, edges, cums, left=0.0, right=cums[-1])


def sample_cell_averages(kernel: Kernel, dx: float) -> tuple[np.ndarray, float]:
    """Cell averages of the kernel on a symmetric grid of width dx covering its support.

    Returns (values, x0) with x0 the left edge of the first cell. Exact for
    both representations because they are piecewise constant.
    """
    radius = support_radius(kernel)
    if isinstance(kernel, Sampled):
        # Cover the full (possibly asymmetric) sample window.
        radius = max(radius, abs(kernel.x0), abs(kernel.x0 + kernel.values.size * kernel.dx))
    half_cells = max(1, int(math.ceil(radius / dx)))
    edges = (np.arange(2 * half_cells + 1) - half_cells) * dx
    prim = primitive(kernel, edges)
    return np.diff(prim) / dx, float(edges[0])


# ---------------------------------------------------------------------------
# Regularity of the autoconvolution (square-integrable gradient criterion)


def _autoconvolution_gradient_norm(kernel: Kernel, dx: float) -> float:
    """Discrete L2 norm of the centered-difference gradient of (K~ * K).

    K~ is the reflection; the autoconvolution is computed from exact cell
    averages on resolution dx, so refinements converge to the continuum value
    whenever the gradient is square integrable.
    """
    values, _ = sample_cell_averages(kernel, dx)
    auto = fftconvolve(values[::-1], values) * dx
    padded = np.concatenate([[0.0], auto, [0.0]])
    grad = (padded[2:] - padded[:-2]) / (2.0 * dx)
    return float(math.sqrt(np.sum(grad * grad) * dx))


def _fourier_tail_integral(kernel: Kernel, dx: float) -> float:
    """Integral of |xi|^2 |K_hat(xi)|^4 over 1 < |xi| <= Nyquist(pi/dx).

    Finiteness of the full-line integral is the Fourier form of the
    square-integrable autoconvolution-gradient requirement; the grid Nyquist
    frequency truncates the tail and a half-resolution recheck flags whether
    the truncation matters.
    """
    values, _ = sample_cell_averages(kernel, dx)
    # The zero-padded window sets the frequency spacing; it must resolve the
    # O(1/radius)-period oscillations of the transform.
    radius = max(support_radius(kernel), dx)
    window = max(256.0, 64.0 * radius)
    n = next_fast_len(int(math.ceil(window / dx)))
    spectrum = np.abs(np.fft.rfft(values, n)) * dx
    xi = 2.0 * math.pi * np.fft.rfftfreq(n, d=dx)
    dxi = xi[1] - xi[0]
    tail = xi > 1.0
    # Factor 2: the kernel is real, so the |xi| < -1 half contributes equally.
    return float(2.0 * np.sum(xi[tail] ** 2 * spectrum[tail] ** 4) * dxi)


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class HypothesisReport:
    """Measured properties of a single kernel.

    linf/l1 finite is the integrability requirement; tv finite is the
    bounded-variation requirement whose constant |alpha|/R controls gradient
    bounds; symmetric and compact_support are structural; h4_norm and
    h4_fourier_integral quantify the square-integrable autoconvolution
    gradient, with h4_refinement_stable recording whether the Fourier tail
    survived a half-resolution recheck within 10%.
    """

    linf_norm: float
    l1_norm: float
    tv_norm: float
    symmetric: bool
    compact_support: bool
    support_radius: float
    h4_norm: float
    h4_fourier_integral: float
    h4_refinement_stable: bool
    grid_resolution: float

    def as_dict(self) -> dict:
        return {
            "linf_norm": self.linf_norm,
            "l1_norm": self.l1_norm,
            "tv_norm": self.tv_norm,
            "symmetric": self.symmetric,
            "compact_support": self.compact_support,
            "support_radius": self.support_radius,
            "h4_norm": self.h4_norm,
            "h4_fourier_integral": self.h4_fourier_integral,
            "h4_refinement_stable": self.h4_refinement_stable,
            "grid_resolution": self.grid_resolution,
        }


def analyze(kernel: Kernel, grid_resolution: Optional[float] = None) -> HypothesisReport:
    """Measure norms and structural properties of one kernel.

    Closed-form kernels get exact norms; sampled kernels are measured from
    their stored cell averages. The autoconvolution-gradient quantities are
    always computed on a grid of width grid_resolution (default: radius/1000
    for closed forms, the native spacing for sampled kernels).
    """
    if grid_resolution is None:
        if isinstance(kernel, Sampled):
            grid_resolution = kernel.dx
        else:
            grid_resolution = support_radius(kernel) / 1000.0
    dx = float(grid_resolution)
    if not (dx > 0.0):
        raise ValueError(f"grid_resolution must be positive, got {dx}")
    tail = _fourier_tail_integral(kernel, dx)
    tail_fine = _fourier_tail_integral(kernel, dx / 2.0)
    stable = abs(tail_fine - tail) <= 0.1 * max(abs(tail), 1e-300)
    return HypothesisReport(
        linf_norm=linf_norm(kernel),
        l1_norm=l1_norm(kernel),
        tv_norm=tv_norm(kernel),
        symmetric=is_symmetric(kernel),
        compact_support=True,
        support_radius=support_radius(kernel),
        h4_norm=_autoconvolution_gradient_norm(kernel, dx),
        h4_fourier_integral=tail,
        h4_refinement_stable=bool(stable),
        grid_resolution=dx,
    )


# ---------------------------------------------------------------------------
# Kernel matrices and coupling analysis


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """n x n matrix of interaction kernels; entry (i, l) acts on species l in species i's potential."""

    entries: tuple

    def __post_init__(self) -> None:
        n = len(self.entries)
        if n == 0 or any(len(row) != n for row in self.entries):
            raise ValueError("kernel matrix must be square and nonempty")
        object.__setattr__(self, "entries", tuple(tuple(row) for row in self.entries))

    @property
    def n(self) -> int:
        return len(self.entries)

    @classmethod
    def from_scale(cls, base: Kernel, scale_matrix) -> "KernelMatrix":
        """Entries scale_matrix[i][l] * base; keeps the shared shape explicit."""
        a = np.asarray(scale_matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"scale matrix must be square, got shape {a.shape}")
        rows = []
        for i in range(a.shape[0]):
            row = []
            for l in range(a.shape[1]):
                if isinstance(base, TopHat):
                    row.append(TopHat(base.alpha * a[i, l], base.R))
                else:
                    row.append(Sampled(base.values * a[i, l], base.dx, base.x0))
            rows.append(tuple(row))
        return cls(tuple(rows))

    def scale_form(self) -> Optional[tuple[float, np.ndarray]]:
        """(R, alpha matrix) when every entry is a top-hat sharing one radius, else None."""
        first = self.entries[0][0]
        if not isinstance(first, TopHat):
            return None
        R = first.R
        alpha = np.empty((self.n, self.n))
        for i, row in enumerate(self.entries):
            for l, k in enumerate(row):
                if not isinstance(k, TopHat) or k.R != R:
                    return None
                alpha[i, l] = k.alpha
        return R, alpha


@dataclass(frozen=True)
class BalanceWitness:
    """Reason detailed balance fails: the offending 1-based species pair and,
    for inconsistent loops, the closed node cycle whose ratio product is not 1."""

    pair: tuple[int, int]
    reason: str
    cycle: Optional[tuple[int, ...]] = None

    def as_dict(self) -> dict:
        out = {"pair": list(self.pair), "reason": self.reason}
        if self.cycle is not None:
            out["cycle"] = list(self.cycle)
        return out


@dataclass(frozen=True)
class DetailedBalance:
    """Outcome of the coupling-compatibility solve: positive weights pi with
    pi_i a_ij = pi_j a_ji (normalized pi_1 = 1), or a witness of impossibility."""

    satisfied: bool
    weights: Optional[tuple[float, ...]] = None
    witness: Optional[BalanceWitness] = None

    def as_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "weights": list(self.weights) if self.weights is not None else None,
            "witness": self.witness.as_dict() if self.witness is not None else None,
        }


def _solve_from_ratio_edges(n: int, edges: dict) -> DetailedBalance:
    """Propagate pi along a spanning forest of the ratio graph and verify the rest.

    edges maps (i, j) with i < j to the ratio pi_j / pi_i.
    """
    adjacency = {i: [] for i in range(n)}
    for (i, j), ratio in edges.items():
        adjacency[i].append((j, ratio))
        adjacency[j].append((i, 1.0 / ratio))

    pi = np.zeros(n)
    parent = np.full(n, -1, dtype=int)
    tree_edges = set()
    for root in range(n):
        if pi[root] != 0.0:
            continue
        pi[root] = 1.0
        queue = [root]
        while queue:
            i = queue.pop()
            for j, ratio in adjacency[i]:
                if pi[j] == 0.0:
                    pi[j] = pi[i] * ratio
                    parent[j] = i
                    tree_edges.add((min(i, j), max(i, j)))
                    queue.append(j)

    for (i, j), ratio in sorted(edges.items()):
        if (i, j) in tree_edges:
            continue
        lhs = pi[j]
        rhs = pi[i] * ratio
        if abs(lhs - rhs) > BALANCE_RTOL * max(abs(lhs), abs(rhs)):
            cycle = _tree_cycle(parent, i, j)
            return DetailedBalance(
                satisfied=False,
                witness=BalanceWitness(pair=(i + 1, j + 1), reason="cycle_inconsistent", cycle=cycle),
            )

    pi = pi / pi[0]
    return DetailedBalance(satisfied=True, weights=tuple(float(w) for w in pi))


def _tree_cycle(parent: np.ndarray, i: int, j: int) -> tuple[int, ...]:
    """Closed 1-based node cycle formed by the tree path i..j plus the edge (j, i)."""
    def path_to_root(k):
        out = [k]
        while parent[out[-1]] >= 0:
            out.append(int(parent[out[-1]]))
        return out

    pi_path, pj_path = path_to_root(i), path_to_root(j)
    seen = {k: idx for idx, k in enumerate(pi_path)}
    for idx_j, k in enumerate(pj_path):
        if k in seen:
            cycle = pi_path[: seen[k] + 1] + pj_path[:idx_j][::-1]
            return tuple(c + 1 for c in cycle) + (i + 1,)
    return (i + 1, j + 1, i + 1)


def solve_detailed_balance(scale_matrix) -> DetailedBalance:
    """Find positive pi with pi_i a_ij = pi_j a_ji, or explain why none exists.

    Couplings where exactly one direction vanishes or the two directions have
    opposite signs are immediately infeasible; otherwise the pairwise ratios
    a_ij / a_ji are propagated along a spanning forest (pi_1 = 1) and every
    remaining pair is verified to 1e-12 relative.
    """
    a = np.asarray(scale_matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"scale matrix must be square, got shape {a.shape}")
    n = a.shape[0]
    edges = {}
    for i in range(n):
        for j in range(i + 1, n):
            aij, aji = a[i, j], a[j, i]
            if aij == 0.0 and aji == 0.0:
                continue
            if aij == 0.0 or aji == 0.0:
                return DetailedBalance(
                    satisfied=False,
                    witness=BalanceWitness(pair=(i + 1, j + 1), reason="one_sided_coupling"),
                )
            if (aij > 0.0) != (aji > 0.0):
                return DetailedBalance(
                    satisfied=False,
                    witness=BalanceWitness(pair=(i + 1, j + 1), reason="sign_mismatch"),
                )
            edges[(i, j)] = aij / aji
    return _solve_from_ratio_edges(n, edges)


def _pair_ratio(kij: Kernel, kji: Kernel):
    """Ratio r with kij = r * kji, or None when the pair is not proportional.

    Returns (ratio, zero_ij, zero_ji); a zero flag marks an identically zero kernel.
    """
    if isinstance(kij, TopHat) and isinstance(kji, TopHat):
        zij, zji = kij.alpha == 0.0, kji.alpha == 0.0
        if zij or zji:
            return None, zij, zji
        if kij.R != kji.R:
            return None, False, False
        return kij.alpha / kji.alpha, False, False
    if isinstance(kij, Sampled) and isinstance(kji, Sampled):
        same_grid = kij.dx == kji.dx and kij.x0 == kji.x0 and kij.values.size == kji.values.size
        zij = not np.any(kij.values)
        zji = not np.any(kji.values)
        if zij or zji:
            return None, zij, zji
        if not same_grid:
            return None, False, False
        k = int(np.argmax(np.abs(kji.values)))
        r = kij.values[k] / kji.values[k]
        if np.max(np.abs(kij.values - r * kji.values)) <= 1e-12 * np.max(np.abs(kij.values)):
            return r, False, False
        return None, False, False
    return None, False, False


def solve_detailed_balance_kernels(kernels: KernelMatrix) -> DetailedBalance:
    """Detailed balance for a full kernel matrix via pairwise proportionality ratios."""
    scale = kernels.scale_form()
    if scale is not None:
        return solve_detailed_balance(scale[1])
    n = kernels.n
    edges = {}
    for i in range(n):
        for j in range(i + 1, n):
            ratio, zij, zji = _pair_ratio(kernels.entries[i][j], kernels.entries[j][i])
            if zij and zji:
                continue
            if zij or zji:
                return DetailedBalance(
                    satisfied=False,
                    witness=BalanceWitness(pair=(i + 1, j + 1), reason="one_sided_coupling"),
                )
            if ratio is None:
                return DetailedBalance(
                    satisfied=False,
                    witness=BalanceWitness(pair=(i + 1, j + 1), reason="incomparable_kernels"),
                )
            if ratio < 0.0:
                return DetailedBalance(
                    satisfied=False,
                    witness=BalanceWitness(pair=(i + 1, j + 1), reason="sign_mismatch"),
                )
            edges[(i, j)] = ratio
    return _solve_from_ratio_edges(n, edges)


def small_mass_constants(D: Sequence[float], masses: Sequence[float], kernels) -> np.ndarray:
    """c_i = D_i - 1/2 sum_j (m_i ||K_ij||_inf + m_j ||K_ji||_inf).

    Positivity of every c_i is the smallness condition under which the entropy
    dissipation argument closes. kernels may be a KernelMatrix or a square
    nested sequence of kernels.
    """
    if not isinstance(kernels, KernelMatrix):
        kernels = KernelMatrix(tuple(tuple(row) for row in kernels))
    D = np.asarray(D, dtype=float)
    m = np.asarray(masses, dtype=float)
    n = kernels.n
    if D.shape != (n,) or m.shape != (n,):
        raise ValueError(f"need {n} diffusion constants and masses, got {D.shape} and {m.shape}")
    c = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += m[i] * linf_norm(kernels.entries[i][j]) + m[j] * linf_norm(kernels.entries[j][i])
        c[i] = D[i] - 0.5 * acc
    return c


@dataclass(frozen=True)
class SystemHypothesisReport:
    """Per-kernel reports plus the system-level verdicts that pick the applicable theory.

    hypothesis flags: h1 integrable+bounded, h2 bounded variation, h3 even
    kernels, h4 square-integrable autoconvolution gradient (finite and
    refinement-stable), h5 detailed balance, h6 compact support.
    applicability: which well-posedness regimes the measured kernels support.
    """

    kernel_reports: tuple
    detailed_balance: DetailedBalance
    small_mass_constants: Optional[tuple[float, ...]]
    hypotheses: dict
    theorem_applicability: dict

    def as_dict(self) -> dict:
        return {
            "kernel_reports": [[r.as_dict() for r in row] for row in self.kernel_reports],
            "detailed_balance": self.detailed_balance.as_dict(),
            "small_mass_constants": (
                list(self.small_mass_constants) if self.small_mass_constants is not None else None
            ),
            "hypotheses": dict(self.hypotheses),
            "theorem_applicability": dict(self.theorem_applicability),
        }


def analyze_system(
    kernels: KernelMatrix,
    D: Optional[Sequence[float]] = None,
    masses: Optional[Sequence[float]] = None,
    grid_resolution: Optional[float] = None,
) -> SystemHypothesisReport:
    """Analyze every kernel of a system and derive the applicability flags."""
    reports = tuple(
        tuple(analyze(k, grid_resolution) for k in row) for row in kernels.entries
    )
    flat = [r for row in reports for r in row]
    balance = solve_detailed_balance_kernels(kernels)

    constants = None
    if D is not None and masses is not None:
        constants = tuple(float(c) for c in small_mass_constants(D, masses, kernels))

    hypotheses = {
        "h1_bounded_integrable": all(math.isfinite(r.linf_norm) and math.isfinite(r.l1_norm) for r in flat),
        "h2_bounded_variation": all(math.isfinite(r.tv_norm) for r in flat),
        "h3_symmetric": all(r.symmetric for r in flat),
        "h4_autoconvolution_gradient": all(
            math.isfinite(r.h4_norm) and r.h4_refinement_stable for r in flat
        ),
        "h5_detailed_balance": balance.satisfied,
        "h6_compact_support": all(r.compact_support for r in flat),
    }

    small_mass = constants is not None and all(c > 0.0 for c in constants)
    n = kernels.n
    weak_small = hypotheses["h1_bounded_integrable"] and small_mass
    weak_arbitrary = (
        hypotheses["h1_bounded_integrable"]
        and hypotheses["h2_bounded_variation"]
        and hypotheses["h3_symmetric"]
        and (n == 1 or hypotheses["h5_detailed_balance"])
    )
    applicability = {
        "weak_small_mass": weak_small,
        "weak_arbitrary_mass": weak_arbitrary,
        "strong_solution": hypotheses["h4_autoconvolution_gradient"] and (weak_small or weak_arbitrary),
        "classical_solution": hypotheses["h6_compact_support"]
        and (weak_arbitrary or (weak_small and hypotheses["h2_bounded_variation"])),
    }
    return SystemHypothesisReport(
        kernel_reports=reports,
        detailed_balance=balance,
        small_mass_constants=constants,
        hypotheses=hypotheses,
        theorem_applicability=applicability,
    )
