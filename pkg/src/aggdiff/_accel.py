"""Compiled inner loop for kernel matrices in shared-radius top-hat form.

The public scheme/timestepping modules are the reference implementation; this
module reproduces the same arithmetic in nopython loops so full-horizon runs
stay inside an interactive time budget. Only the top-hat scale-matrix family
(which includes the kernel-free diffusion case) is compiled; anything else
falls back to the reference path.
"""
from __future__ import annotations

import numpy as np
from numba import njit

# advance() status codes
REACHED_TARGET = 0
MAX_STEPS = 1
DT_UNDERFLOW = 2
NON_FINITE = 3


@njit(cache=True)
def _potential_velocities(u, dx, D, u_floor, has_kernel, alpha, scale, off_lo, off_hi, frac_lo, frac_hi, cums, W, xi, v):
    """Fill xi (n, m) and interface velocities v (n, m+1); return max |v|."""
    n, m = u.shape
    if has_kernel:
        for l in range(n):
            acc = 0.0
            cums[l, 0] = 0.0
            for j in range(m):
                acc += u[l, j]
                cums[l, j + 1] = acc
        for l in range(n):
            total = cums[l, m]
            for j in range(m):
                ih = j + off_hi
                if ih < 0:
                    ph = 0.0
                elif ih >= m:
                    ph = total
                else:
                    ph = cums[l, ih] + frac_hi * u[l, ih]
                il = j + off_lo
                if il < 0:
                    pl = 0.0
                elif il >= m:
                    pl = total
                else:
                    pl = cums[l, il] + frac_lo * u[l, il]
                W[l, j] = (ph - pl) * dx
    vmax = 0.0
    for i in range(n):
        for j in range(m):
            w = u[i, j]
            if w < u_floor:
                w = u_floor
            val = D[i] * np.log(w)
            if has_kernel:
                acc = 0.0
                for l in range(n):
                    acc += alpha[i, l] * W[l, j]
                val += scale * acc
            xi[i, j] = val
        v[i, 0] = 0.0
        v[i, m] = 0.0
        for k in range(1, m):
            vk = -(xi[i, k] - xi[i, k - 1]) / dx
            v[i, k] = vk
            av = abs(vk)
            if av > vmax:
                vmax = av
    return vmax


@njit(cache=True)
def _flux_divergence(u, v, theta, dx, east, west, out):
    """Upwind flux divergence with minmod-limited reconstructions, per species."""
    n, m = u.shape
    for i in range(n):
        for j in range(m):
            if j == 0:
                s = (u[i, 1] - u[i, 0]) / dx
                cap = 2.0 * u[i, 0] / dx
            elif j == m - 1:
                s = (u[i, m - 1] - u[i, m - 2]) / dx
                cap = 2.0 * u[i, m - 1] / dx
            else:
                a = theta * (u[i, j] - u[i, j - 1]) / dx
                b = (u[i, j + 1] - u[i, j - 1]) / (2.0 * dx)
                c = theta * (u[i, j + 1] - u[i, j]) / dx
                if a > 0.0 and b > 0.0 and c > 0.0:
                    s = min(min(a, b), c)
                elif a < 0.0 and b < 0.0 and c < 0.0:
                    s = max(max(a, b), c)
                else:
                    s = 0.0
                cap = -1.0
            if cap >= 0.0:
                if s > cap:
                    s = cap
                elif s < -cap:
                    s = -cap
            half = 0.5 * dx * s
            e = u[i, j] + half
            w = u[i, j] - half
            east[j] = e if e > 0.0 else 0.0
            west[j] = w if w > 0.0 else 0.0
        fprev = 0.0
        for k in range(1, m):
            vk = v[i, k]
            if vk > 0.0:
                f = vk * east[k - 1]
            else:
                f = vk * west[k]
            out[i, k - 1] = -(f - fprev) / dx
            fprev = f
        out[i, m - 1] = fprev / dx


@njit(cache=True)
def _finish_stage(arr, dx, clipped):
    """Clip round-off negatives to 0 with accounting.

    Returns (all_finite, worst negative-to-max ratio seen before clipping).
    """
    n, m = arr.shape
    mx = 0.0
    ok = True
    for i in range(n):
        for j in range(m):
            val = arr[i, j]
            if not np.isfinite(val):
                ok = False
            if val > mx:
                mx = val
    worst = 0.0
    for i in range(n):
        for j in range(m):
            val = arr[i, j]
            if val < 0.0:
                if mx > 0.0:
                    r = -val / mx
                    if r > worst:
                        worst = r
                clipped[i] += -val * dx
                arr[i, j] = 0.0
    return ok, worst


@njit(cache=True)
def advance(u, t, t_target, max_steps, dx, D, theta, u_floor, cfl, dt_max, dt_min,
            has_kernel, alpha, scale, off_lo, off_hi, frac_lo, frac_hi, clipped):
    """Run SSP-RK3 steps in place until t_target or max_steps.

    Returns (t, steps, status, min_dt, last_dt, worst_neg, vmax_last). clipped
    accumulates per-species clipped mass across the call.
    """
    n, m = u.shape
    cums = np.empty((n, m + 1))
    W = np.empty((n, m))
    xi = np.empty((n, m))
    v = np.empty((n, m + 1))
    east = np.empty(m)
    west = np.empty(m)
    L = np.empty((n, m))
    u1 = np.empty((n, m))
    u2 = np.empty((n, m))

    steps = 0
    status = MAX_STEPS
    min_dt = np.inf
    last_dt = 0.0
    worst_neg = 0.0
    vmax = 0.0

    while steps < max_steps:
        if t >= t_target:
            status = REACHED_TARGET
            break
        vmax = _potential_velocities(u, dx, D, u_floor, has_kernel, alpha, scale,
                                     off_lo, off_hi, frac_lo, frac_hi, cums, W, xi, v)
        dt = dt_max
        if vmax > 0.0:
            dtv = cfl * dx / vmax
            if dtv < dt:
                dt = dtv
        if dt < dt_min:
            status = DT_UNDERFLOW
            break
        reached = False
        if t + dt >= t_target:
            dt = t_target - t
            reached = True

        _flux_divergence(u, v, theta, dx, east, west, L)
        for i in range(n):
            for j in range(m):
                u1[i, j] = u[i, j] + dt * L[i, j]
        ok, wn = _finish_stage(u1, dx, clipped)
        if wn > worst_neg:
            worst_neg = wn
        if not ok:
            status = NON_FINITE
            break

        _potential_velocities(u1, dx, D, u_floor, has_kernel, alpha, scale,
                              off_lo, off_hi, frac_lo, frac_hi, cums, W, xi, v)
        _flux_divergence(u1, v, theta, dx, east, west, L)
        for i in range(n):
            for j in range(m):
                u2[i, j] = 0.75 * u[i, j] + 0.25 * (u1[i, j] + dt * L[i, j])
        ok, wn = _finish_stage(u2, dx, clipped)
        if wn > worst_neg:
            worst_neg = wn
        if not ok:
            status = NON_FINITE
            break

        _potential_velocities(u2, dx, D, u_floor, has_kernel, alpha, scale,
                              off_lo, off_hi, frac_lo, frac_hi, cums, W, xi, v)
        _flux_divergence(u2, v, theta, dx, east, west, L)
        third = 1.0 / 3.0
        for i in range(n):
            for j in range(m):
                u[i, j] = third * u[i, j] + (2.0 * third) * (u2[i, j] + dt * L[i, j])
        ok, wn = _finish_stage(u, dx, clipped)
        if wn > worst_neg:
            worst_neg = wn
        if not ok:
            status = NON_FINITE
            break

        t = t_target if reached else t + dt
        steps += 1
        last_dt = dt
        if dt < min_dt:
            min_dt = dt
        if reached:
            status = REACHED_TARGET
            break

    if status == MAX_STEPS and t >= t_target:
        status = REACHED_TARGET
    return t, steps, status, min_dt, last_dt, worst_neg, vmax
