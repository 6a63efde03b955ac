"""Tests for adaptive SSP-RK3 integration, output cadence, and abort handling."""
from __future__ import annotations

import math

import numpy as np
import pytest

import aggdiff.timestepping as ts
from aggdiff import (
    CellField,
    Grid1D,
    KernelMatrix,
    SchemeParams,
    TimeControls,
    gaussian_initial_data,
    grid_from_cells_per_unit,
    indicator_initial_data,
    make_state,
    mass,
    run,
    ssp_rk3_step,
    stable_dt,
    tophat,
)
from aggdiff.kernels import Sampled
from aggdiff.timestepping import (
    NonFiniteState,
    NumericalAbort,
    TimestepUnderflow,
    _finish_stage_numpy,
    default_dt_max,
)


def _heat_state(L=2.0, cells_per_unit=25, D=0.25, sigma=0.5):
    grid = grid_from_cells_per_unit(L, cells_per_unit)
    field = gaussian_initial_data(grid, sigma=sigma, mass=1.0)
    return make_state(grid, [field], SchemeParams(D=(D,)))


def _kernel_state(L=4.0, cells_per_unit=25, alpha=2.0, R=1.0, D=0.25, ell=1.5):
    grid = grid_from_cells_per_unit(L, cells_per_unit)
    field = indicator_initial_data(grid, ell, 1.0)
    kernels = KernelMatrix(((tophat(alpha, R),),))
    return make_state(grid, [field], SchemeParams(D=(D,)), kernels)


# ------------------------------------------------------------------ controls


def test_time_controls_validation():
    with pytest.raises(ValueError):
        TimeControls(t_end=-1.0)
    with pytest.raises(ValueError):
        TimeControls(t_end=math.inf)
    with pytest.raises(ValueError):
        TimeControls(t_end=1.0, cfl=0.0)
    with pytest.raises(ValueError):
        TimeControls(t_end=1.0, cfl=1.5)
    with pytest.raises(ValueError):
        TimeControls(t_end=1.0, dt_min=0.0)
    with pytest.raises(ValueError):
        TimeControls(t_end=1.0, dt_max=1e-13, dt_min=1e-12)
    with pytest.raises(ValueError):
        TimeControls(t_end=1.0, diagnostic_stride=0)
    c = TimeControls(t_end=1.0, snapshot_times=[0, 1])
    assert c.snapshot_times == (0.0, 1.0)
    assert all(isinstance(s, float) for s in c.snapshot_times)


def test_default_dt_max_is_parabolic_bound():
    state = _heat_state(D=0.5)
    assert default_dt_max(state) == pytest.approx(0.4 * state.grid.dx ** 2 / 0.5, rel=1e-15)


def test_stable_dt_uniform_state_hits_ceiling():
    grid = Grid1D(2.0, 50)
    state = make_state(grid, [np.full(50, 0.25)], SchemeParams(D=(0.25,)))
    controls = TimeControls(t_end=1.0)
    assert stable_dt(state, controls) == default_dt_max(state)
    capped = TimeControls(t_end=1.0, dt_max=1e-6)
    assert stable_dt(state, capped) == 1e-6


def test_stable_dt_cfl_bound_from_velocities():
    from aggdiff import velocities

    state = _kernel_state(alpha=5.0)
    controls = TimeControls(t_end=1.0, cfl=0.25)
    vmax = np.max(np.abs(velocities(state, 0)))
    expected = min(default_dt_max(state), 0.25 * state.grid.dx / vmax)
    assert stable_dt(state, controls) == pytest.approx(expected, rel=1e-15)


def test_stable_dt_underflow_raises():
    state = _kernel_state(alpha=30.0, ell=1.0)
    controls = TimeControls(t_end=1.0, dt_min=1.0, dt_max=2.0)
    with pytest.raises(TimestepUnderflow):
        stable_dt(state, controls)


# -------------------------------------------------------------- single steps


def test_ssp_rk3_linear_amplification_factor():
    # for du/dt = lam*u one step multiplies by 1 + z + z^2/2 + z^3/6 exactly
    grid = Grid1D(1.0, 8)
    u0 = np.linspace(1.0, 2.0, 8)
    state = make_state(grid, [u0], SchemeParams(D=(1.0,)))
    lam, dt = -2.0, 0.1
    z = lam * dt
    factor = 1.0 + z + z * z / 2.0 + z ** 3 / 6.0
    new = ssp_rk3_step(state, dt, rhs_fn=lambda st: lam * st.u)
    np.testing.assert_allclose(new.u[0], factor * u0, rtol=1e-14)
    assert new.t == pytest.approx(0.1)
    assert np.array_equal(state.u[0], u0)  # input state untouched


def test_ssp_rk3_step_third_order_on_exponential():
    grid = Grid1D(1.0, 4)
    state = make_state(grid, [np.ones(4)], SchemeParams(D=(1.0,)))
    lam = -1.0
    errs = []
    for dt in (0.2, 0.1):
        new = ssp_rk3_step(state, dt, rhs_fn=lambda st: lam * st.u)
        errs.append(abs(new.u[0, 0] - math.exp(lam * dt)))
    assert errs[1] < errs[0] / 12.0  # third order: factor 16 expected


def test_ssp_rk3_step_rejects_non_finite():
    grid = Grid1D(1.0, 8)
    state = make_state(grid, [np.ones(8)], SchemeParams(D=(1.0,)))
    with pytest.raises(NonFiniteState) as info:
        ssp_rk3_step(state, 0.1, rhs_fn=lambda st: np.full_like(st.u, np.nan))
    assert info.value.state is state


def test_finish_stage_clipping_accounting():
    arr = np.array([[1.0, -0.25, 2.0, -0.5]])
    clipped = np.zeros(1)
    ok, worst = _finish_stage_numpy(arr, dx=0.1, clipped=clipped)
    assert ok
    assert worst == pytest.approx(0.5 / 2.0)  # deepest undershoot over the stage max
    assert clipped[0] == pytest.approx(0.75 * 0.1)
    assert np.array_equal(arr, [[1.0, 0.0, 2.0, 0.0]])
    bad = np.array([[np.nan, 1.0]])
    ok, _ = _finish_stage_numpy(bad, dx=0.1, clipped=np.zeros(1))
    assert not ok


# --------------------------------------------------------------------- runs


def test_run_snapshot_and_diagnostic_cadence():
    state = _heat_state()
    controls = TimeControls(
        t_end=0.01, snapshot_times=(0.0, 0.005, 0.01), diagnostic_stride=10
    )
    snap_times, diag = [], []
    final, report = run(
        state,
        controls,
        on_snapshot=lambda s: snap_times.append(s.t),
        on_diagnostics=lambda s, dt, k: diag.append((k, s.t, dt)),
    )
    assert snap_times == [0.0, 0.005, 0.01]
    assert final.t == 0.01
    assert report.final_t == 0.01
    assert report.steps == diag[-1][0]
    assert diag[0] == (0, 0.0, 0.0)
    interior = [k for k, _, _ in diag[1:-1]]
    assert all(k % 10 == 0 for k in interior)
    steps_seen = [k for k, _, _ in diag]
    assert steps_seen == sorted(set(steps_seen))  # strictly increasing, no repeats
    assert mass(final.field(0)) == pytest.approx(1.0, rel=1e-12)
    assert report.min_dt <= report.last_dt * (1 + 1e-12)
    assert report.worst_negative_ratio >= 0.0
    assert len(report.clipped_mass) == 1


def test_run_zero_horizon():
    state = _heat_state()
    controls = TimeControls(t_end=0.0, snapshot_times=(0.0,))
    snaps, diag = [], []
    final, report = run(state, controls, on_snapshot=snaps.append,
                        on_diagnostics=lambda s, dt, k: diag.append(k))
    assert report.steps == 0
    assert final.t == 0.0
    assert len(snaps) == 1 and snaps[0].t == 0.0
    assert diag == [0]
    assert report.as_dict()["min_dt"] is None


def test_run_skips_out_of_range_and_duplicate_snapshots():
    state = _heat_state()
    controls = TimeControls(
        t_end=0.004, snapshot_times=(-1.0, 0.002, 0.002, 7.0), diagnostic_stride=1000
    )
    snaps = []
    run(state, controls, on_snapshot=lambda s: snaps.append(s.t))
    assert snaps == [0.002]


def test_run_diag_cadence_survives_snapshot_interruptions():
    # a snapshot mid-stride must not shift later diagnostics off the stride grid
    state = _heat_state()
    controls = TimeControls(t_end=0.1, snapshot_times=(0.033,), diagnostic_stride=7)
    diag = []
    _, report = run(state, controls, on_diagnostics=lambda s, dt, k: diag.append(k))
    interior = diag[1:-1]
    assert interior and all(k % 7 == 0 for k in interior)
    assert diag[-1] == report.steps


def test_run_reports_clipping_and_conserves_mass_with_kernel():
    state = _kernel_state(alpha=2.0)
    m0 = mass(state.field(0))
    controls = TimeControls(t_end=0.05)
    final, report = run(state, controls)
    assert mass(final.field(0)) == pytest.approx(m0, rel=1e-12)
    assert np.all(final.u >= 0.0)
    assert all(c >= 0.0 for c in report.clipped_mass)
    assert report.worst_negative_ratio < 1e-12  # positivity-preserving under CFL
    assert report.steps > 0 and report.min_dt > 0


def test_run_underflow_attaches_state_and_report():
    state = _kernel_state(alpha=30.0, ell=1.0)
    controls = TimeControls(t_end=1.0, dt_min=1e-3, dt_max=1e-2)
    with pytest.raises(TimestepUnderflow) as info:
        run(state, controls)
    exc = info.value
    assert isinstance(exc, NumericalAbort)
    assert exc.state is not None and exc.state.u.shape == state.u.shape
    assert exc.report is not None and exc.report.steps == 0


def test_run_rejects_unusable_dt_window():
    state = _heat_state()
    with pytest.raises(ValueError):
        run(state, TimeControls(t_end=1.0, dt_min=1.0))


def test_run_progress_lines(capfd):
    state = _heat_state()
    run(state, TimeControls(t_end=0.002, progress_every=1))
    err = capfd.readouterr().err
    assert "mass_err=" in err and "dt=" in err


# ----------------------------------------------- fast path vs reference path


def _force_python_path(monkeypatch):
    monkeypatch.setattr(ts, "_fast_form", lambda s: None)


def test_accelerated_and_reference_paths_agree_scalar(monkeypatch):
    state = _kernel_state(alpha=2.0, cells_per_unit=25)
    controls = TimeControls(t_end=0.05, diagnostic_stride=17)
    fast_final, fast_report = run(state, controls)
    _force_python_path(monkeypatch)
    ref_final, ref_report = run(state, controls)
    assert fast_report.steps == ref_report.steps
    assert fast_report.min_dt == pytest.approx(ref_report.min_dt, rel=1e-13)
    assert fast_report.last_dt == pytest.approx(ref_report.last_dt, rel=1e-13)
    assert np.max(np.abs(fast_final.u - ref_final.u)) < 1e-13


def test_accelerated_and_reference_paths_agree_system(monkeypatch):
    grid = grid_from_cells_per_unit(3.0, 20)
    fields = [indicator_initial_data(grid, 1.0, 1.0), gaussian_initial_data(grid, 0.6, 1.0)]
    kernels = KernelMatrix(((tophat(3.0, 1.0), tophat(-1.0, 1.0)),
                            (tophat(-1.0, 1.0), tophat(1.0, 1.0))))
    state = make_state(grid, fields, SchemeParams(D=(0.25, 0.5)), kernels)
    controls = TimeControls(t_end=0.03)
    fast_final, fast_report = run(state, controls)
    _force_python_path(monkeypatch)
    ref_final, ref_report = run(state, controls)
    assert fast_report.steps == ref_report.steps
    assert np.max(np.abs(fast_final.u - ref_final.u)) < 1e-13


def test_sampled_kernel_uses_reference_path_and_conserves_mass():
    grid = grid_from_cells_per_unit(3.0, 20)
    centers = np.arange(-1.0 + 0.01, 1.0, 0.02)
    values = np.exp(-4.0 * centers ** 2)
    kernels = KernelMatrix(((Sampled(values, 0.02, -1.0),),))
    state = make_state(grid, [indicator_initial_data(grid, 1.0, 1.0)],
                       SchemeParams(D=(0.25,)), kernels)
    assert ts._fast_form(state) is None  # no shared-radius top-hat structure
    final, report = run(state, TimeControls(t_end=0.01))
    assert report.steps > 0
    assert mass(final.field(0)) == pytest.approx(1.0, rel=1e-12)
    assert np.all(final.u >= 0.0)


def test_runs_are_deterministic():
    state = _kernel_state(alpha=5.0, cells_per_unit=25)
    controls = TimeControls(t_end=0.05)
    a_final, a_report = run(state, controls)
    b_final, b_report = run(state, controls)
    assert np.array_equal(a_final.u, b_final.u)
    assert a_report.steps == b_report.steps
    assert a_report.min_dt == b_report.min_dt
    assert a_report.last_dt == b_report.last_dt
    assert a_report.clipped_mass == b_report.clipped_mass
