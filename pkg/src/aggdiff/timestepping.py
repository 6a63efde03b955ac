"""Adaptive SSP-RK3 time integration with snapshot and diagnostic cadence.

The step size is the smaller of a velocity CFL bound (cfl * dx / max|v|) and a
parabolic ceiling dt_max; the default ceiling 0.4 dx^2 / max(D) keeps the
explicit treatment of diffusion stable even where the advective velocities
vanish. Steps are shortened to land exactly on snapshot times. Round-off
negatives are clipped to zero after each stage with the clipped mass and the
worst pre-clip undershoot accounted in the run report.
"""
from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _accel
from .scheme import SystemState, tendencies


class NumericalAbort(RuntimeError):
    """Integration failed; carries the last state and a partial run report."""

    def __init__(self, message: str, state: Optional[SystemState] = None, report=None):
        super().__init__(message)
        self.state = state
        self.report = report


class TimestepUnderflow(NumericalAbort):
    pass


class NonFiniteState(NumericalAbort):
    pass


@dataclass(frozen=True)
class TimeControls:
    """Horizon, step-size policy, and output cadence for one run.

    dt_max None means the parabolic default 0.4 dx^2 / max(D). dt_min is the
    abort threshold: a stable step below it indicates collapse of the CFL
    condition rather than progress.
    """

    t_end: float
    cfl: float = 0.25
    dt_max: Optional[float] = None
    dt_min: float = 1e-12
    snapshot_times: tuple = ()
    diagnostic_stride: int = 100
    progress_every: int = 0

    def __post_init__(self) -> None:
        if not (self.t_end >= 0.0) or not math.isfinite(self.t_end):
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not (self.dt_min > 0.0):
            raise ValueError(f"dt_min must be positive, got {self.dt_min}")
        if self.dt_max is not None and not (self.dt_max > self.dt_min):
            raise ValueError(f"dt_max={self.dt_max} must exceed dt_min={self.dt_min}")
        if self.diagnostic_stride < 1:
            raise ValueError(f"diagnostic_stride must be >= 1, got {self.diagnostic_stride}")
        object.__setattr__(self, "snapshot_times", tuple(float(s) for s in self.snapshot_times))


@dataclass(frozen=True)
class RunReport:
    steps: int
    min_dt: float
    last_dt: float
    clipped_mass: tuple
    worst_negative_ratio: float
    final_t: float
    wall_time: float

    def as_dict(self) -> dict:
        return {
            "steps": self.steps,
            "min_dt": self.min_dt if math.isfinite(self.min_dt) else None,
            "last_dt": self.last_dt,
            "clipped_mass": list(self.clipped_mass),
            "worst_negative_ratio": self.worst_negative_ratio,
            "final_t": self.final_t,
            "wall_time": self.wall_time,
        }


def default_dt_max(state: SystemState) -> float:
    """Parabolic ceiling 0.4 dx^2 / max(D): 80% of the forward-Euler heat limit."""
    return 0.4 * state.grid.dx ** 2 / max(state.params.D)


def _resolved_dt_max(state: SystemState, controls: TimeControls) -> float:
    return controls.dt_max if controls.dt_max is not None else default_dt_max(state)


def stable_dt(state: SystemState, controls: TimeControls) -> float:
    """min(dt_max, cfl * dx / max|v|); dt_max when all velocities vanish."""
    from .scheme import velocities

    vmax = 0.0
    for i in range(state.params.n_species):
        vmax = max(vmax, float(np.max(np.abs(velocities(state, i)))))
    dt = _resolved_dt_max(state, controls)
    if vmax > 0.0:
        dt = min(dt, controls.cfl * state.grid.dx / vmax)
    if dt < controls.dt_min:
        raise TimestepUnderflow(f"stable step {dt:.3e} fell below dt_min={controls.dt_min:.3e}", state)
    return dt


def _finish_stage_numpy(arr: np.ndarray, dx: float, clipped: np.ndarray) -> tuple[bool, float]:
    ok = bool(np.all(np.isfinite(arr)))
    mx = float(np.max(arr)) if arr.size else 0.0
    worst = 0.0
    neg = arr < 0.0
    if np.any(neg):
        if mx > 0.0:
            worst = float(-arr[neg].min() / mx)
        clipped += np.where(neg, -arr, 0.0).sum(axis=1) * dx
        np.maximum(arr, 0.0, out=arr)
    return ok, worst


def _step_stages(u: np.ndarray, state: SystemState, dt: float, rhs_fn, clipped: np.ndarray) -> tuple[np.ndarray, bool, float]:
    """Shu-Osher SSP-RK3: three convex forward-Euler combinations with per-stage clipping."""
    worst = 0.0
    l0 = np.asarray(rhs_fn(state.with_values(u)))
    u1 = u + dt * l0
    ok, w = _finish_stage_numpy(u1, state.grid.dx, clipped)
    worst = max(worst, w)
    if not ok:
        return u1, False, worst
    l1 = np.asarray(rhs_fn(state.with_values(u1)))
    u2 = 0.75 * u + 0.25 * (u1 + dt * l1)
    ok, w = _finish_stage_numpy(u2, state.grid.dx, clipped)
    worst = max(worst, w)
    if not ok:
        return u2, False, worst
    l2 = np.asarray(rhs_fn(state.with_values(u2)))
    unew = (1.0 / 3.0) * u + (2.0 / 3.0) * (u2 + dt * l2)
    ok, w = _finish_stage_numpy(unew, state.grid.dx, clipped)
    worst = max(worst, w)
    return unew, ok, worst


def ssp_rk3_step(state: SystemState, dt: float, rhs_fn: Optional[Callable] = None) -> SystemState:
    """One SSP-RK3 step of size dt; rhs_fn defaults to the scheme's flux divergence."""
    fn = rhs_fn if rhs_fn is not None else tendencies
    clipped = np.zeros(state.params.n_species)
    unew, ok, _ = _step_stages(state.u, state, dt, fn, clipped)
    if not ok:
        raise NonFiniteState(f"non-finite values after step at t={state.t}", state)
    return state.with_values(unew, state.t + dt)


def _fast_form(state: SystemState) -> Optional[dict]:
    """Driver arguments when the kernel matrix is in shared-radius top-hat form."""
    n = state.params.n_species
    if state.kernels is None:
        return {
            "has_kernel": False,
            "alpha": np.zeros((n, n)),
            "scale": 0.0,
            "off_lo": 0,
            "off_hi": 0,
            "frac_lo": 0.0,
            "frac_hi": 0.0,
        }
    form = state.kernels.scale_form()
    if form is None:
        return None
    R, alpha = form
    shift = R / state.grid.dx
    c_lo = 0.5 - shift
    c_hi = 0.5 + shift
    return {
        "has_kernel": True,
        "alpha": np.ascontiguousarray(alpha),
        "scale": -1.0 / (2.0 * R),
        "off_lo": int(math.floor(c_lo)),
        "off_hi": int(math.floor(c_hi)),
        "frac_lo": c_lo - math.floor(c_lo),
        "frac_hi": c_hi - math.floor(c_hi),
    }


def _python_advance(u, t, t_target, max_steps, state, controls, dt_max, clipped):
    """Reference-path counterpart of _accel.advance with identical semantics."""
    steps = 0
    status = _accel.MAX_STEPS
    min_dt = math.inf
    last_dt = 0.0
    worst = 0.0
    vmax_last = 0.0
    from .scheme import velocities

    while steps < max_steps:
        if t >= t_target:
            status = _accel.REACHED_TARGET
            break
        st = state.with_values(u, t)
        vmax = 0.0
        for i in range(state.params.n_species):
            vmax = max(vmax, float(np.max(np.abs(velocities(st, i)))))
        vmax_last = vmax
        dt = dt_max
        if vmax > 0.0:
            dt = min(dt, controls.cfl * state.grid.dx / vmax)
        if dt < controls.dt_min:
            status = _accel.DT_UNDERFLOW
            break
        reached = False
        if t + dt >= t_target:
            dt = t_target - t
            reached = True
        unew, ok, w = _step_stages(u, st, dt, tendencies, clipped)
        worst = max(worst, w)
        if not ok:
            status = _accel.NON_FINITE
            break
        u[:] = unew
        t = t_target if reached else t + dt
        steps += 1
        last_dt = dt
        min_dt = min(min_dt, dt)
        if reached:
            status = _accel.REACHED_TARGET
            break
    if status == _accel.MAX_STEPS and t >= t_target:
        status = _accel.REACHED_TARGET
    return t, steps, status, min_dt, last_dt, worst, vmax_last


def run(
    state: SystemState,
    controls: TimeControls,
    on_snapshot: Optional[Callable] = None,
    on_diagnostics: Optional[Callable] = None,
) -> tuple[SystemState, RunReport]:
    """Advance to t_end, shortening steps to land exactly on snapshot times.

    on_snapshot(state) fires at each requested snapshot time (including t=0
    and t_end when listed); on_diagnostics(state, last_dt, step_count) fires at
    t=0, every diagnostic_stride steps, and at the final time. Raises
    TimestepUnderflow/NonFiniteState on numerical aborts, with the offending
    state and a partial report attached.
    """
    wall_start = time.perf_counter()
    n = state.params.n_species
    u = state.u.copy()
    t = state.t
    t_end = controls.t_end
    dt_max = _resolved_dt_max(state, controls)
    if dt_max <= controls.dt_min:
        raise ValueError(f"resolved dt_max={dt_max:.3e} does not exceed dt_min={controls.dt_min:.3e}")
    snaps = [s for s in sorted(set(controls.snapshot_times)) if t <= s <= t_end]
    stride = controls.diagnostic_stride

    fast = _fast_form(state)
    clipped = np.zeros(n)
    steps = 0
    min_dt = math.inf
    last_dt = 0.0
    worst_neg = 0.0
    initial_mass = u.sum(axis=1) * state.grid.dx
    next_progress = controls.progress_every if controls.progress_every > 0 else None

    def current_state() -> SystemState:
        return state.with_values(u.copy(), t)

    def partial_report() -> RunReport:
        return RunReport(
            steps=steps,
            min_dt=min_dt,
            last_dt=last_dt,
            clipped_mass=tuple(float(c) for c in clipped),
            worst_negative_ratio=worst_neg,
            final_t=t,
            wall_time=time.perf_counter() - wall_start,
        )

    if on_diagnostics is not None:
        on_diagnostics(current_state(), last_dt, steps)
    if snaps and snaps[0] == t:
        if on_snapshot is not None:
            on_snapshot(current_state())
        snaps.pop(0)

    last_diag_step = 0
    while t < t_end:
        target = snaps[0] if snaps else t_end
        to_diag = stride - steps % stride
        if fast is not None:
            t, k, status, mdt, ldt, wneg, _ = _accel.advance(
                u, t, target, to_diag,
                state.grid.dx, np.asarray(state.params.D), state.params.theta,
                state.params.u_floor, controls.cfl, dt_max, controls.dt_min,
                fast["has_kernel"], fast["alpha"], fast["scale"],
                fast["off_lo"], fast["off_hi"], fast["frac_lo"], fast["frac_hi"],
                clipped,
            )
        else:
            t, k, status, mdt, ldt, wneg, _ = _python_advance(
                u, t, target, to_diag, state, controls, dt_max, clipped
            )
        steps += k
        if k > 0:
            min_dt = min(min_dt, mdt)
            last_dt = ldt
        worst_neg = max(worst_neg, wneg)

        if status == _accel.DT_UNDERFLOW:
            raise TimestepUnderflow(
                f"stable step fell below dt_min={controls.dt_min:.3e} at t={t:.6g}",
                current_state(), partial_report(),
            )
        if status == _accel.NON_FINITE:
            raise NonFiniteState(
                f"non-finite values at t={t:.6g}", current_state(), partial_report()
            )

        if steps % stride == 0 and steps > last_diag_step and on_diagnostics is not None:
            on_diagnostics(current_state(), last_dt, steps)
            last_diag_step = steps
        if snaps and t == snaps[0]:
            if on_snapshot is not None:
                on_snapshot(current_state())
            snaps.pop(0)
        if next_progress is not None and steps >= next_progress:
            rel = np.max(np.abs(u.sum(axis=1) * state.grid.dx - initial_mass) /
                          np.maximum(np.abs(initial_mass), 1e-300))
            print(f"t={t:.9g} dt={last_dt:.6g} mass_err={rel:.3e}", file=sys.stderr)
            next_progress += controls.progress_every

    if on_diagnostics is not None and steps > last_diag_step:
        on_diagnostics(current_state(), last_dt, steps)
    return current_state(), partial_report()
