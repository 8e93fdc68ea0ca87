"""Numba kernels for the pseudo-time marching of the optimality systems."""

import numpy as np
from numba import njit

STATUS_CONVERGED = 0
STATUS_HORIZON = 1
STATUS_DIVERGED = 2
STATUS_NONFINITE = 3


@njit(cache=True, error_model="numpy", inline="always")
def _p_minus(psi, s, i, j, n, eps):
    if j == 0:
        return psi[s, i, 1] - psi[s, i, 0]
    if j == n - 1:
        return psi[s, i, n - 1] - psi[s, i, n - 2]
    if j == 1:
        return 0.5 * (psi[s, i, 2] - psi[s, i, 0])
    a = psi[s, i, j - 1] - psi[s, i, j - 2]
    b = psi[s, i, j] - psi[s, i, j - 1]
    c = psi[s, i, j + 1] - psi[s, i, j]
    r = (eps + (b - a) * (b - a)) / (eps + (c - b) * (c - b))
    w = 1.0 / (1.0 + 2.0 * r * r)
    return 0.5 * (b + c) - 0.5 * w * (a - 2.0 * b + c)


@njit(cache=True, error_model="numpy", inline="always")
def _p_plus(psi, s, i, j, n, eps):
    if j == 0:
        return psi[s, i, 1] - psi[s, i, 0]
    if j == n - 1:
        return psi[s, i, n - 1] - psi[s, i, n - 2]
    if j == n - 2:
        return 0.5 * (psi[s, i, n - 1] - psi[s, i, n - 3])
    a = psi[s, i, j] - psi[s, i, j - 1]
    b = psi[s, i, j + 1] - psi[s, i, j]
    c = psi[s, i, j + 2] - psi[s, i, j + 1]
    r = (eps + (c - b) * (c - b)) / (eps + (b - a) * (b - a))
    w = 1.0 / (1.0 + 2.0 * r * r)
    return 0.5 * (a + b) - 0.5 * w * (c - 2.0 * b + a)


@njit(cache=True, error_model="numpy")
def _targets(phi, cost, shrink_lo, shrink_w, d, keep, harv, best):
    n_reg, n = phi.shape
    for i in range(n_reg):
        for j in range(n):
            k = shrink_lo[j]
            w = shrink_w[j]
            if w == 0.0:
                shrunk = phi[i, k]
            else:
                shrunk = (1.0 - w) * phi[i, k] + w * phi[i, k + 1]
            a = phi[i, j] + d
            b = shrunk + d + cost[i, j]
            keep[i, j] = a
            harv[i, j] = b
            best[i, j] = b if b < a else a


@njit(cache=True, error_model="numpy")
def _euler(psi, out, drift, hsrc, mixed, exit_rate, slot_rate,
           slot_y, flexible, keep, harv, best, delta, dt, dx, eps, rowres):
    n_slot, n_reg, n = psi.shape
    inv_dx = 1.0 / dx
    for q in range(n_slot * n_reg):
        s = q // n_reg
        i = q - s * n_reg
        r = slot_rate[s]
        y = slot_y[s]
        worst = 0.0
        for j in range(n):
            v = psi[s, i, j]
            f = drift[i, j]
            if f > 0.0:
                ham = -f * _p_plus(psi, s, i, j, n, eps) * inv_dx
            elif f < 0.0:
                ham = -f * _p_minus(psi, s, i, j, n, eps) * inv_dx
            else:
                ham = 0.0
            sw = exit_rate[i] * v - mixed[s, i, j]
            if flexible:
                tgt = best[i, j]
            elif y == 0:
                tgt = keep[i, j]
            else:
                tgt = harv[i, j]
            nv = v + dt * (-delta * v - ham - sw + hsrc[j] - r * (v - tgt))
            out[s, i, j] = nv
            dv = abs(nv - v)
            if not dv <= worst:
                worst = dv
        rowres[q] = worst


@njit(cache=True, error_model="numpy")
def _slot_min(psi, phi):
    n_slot, n_reg, n = psi.shape
    for i in range(n_reg):
        for j in range(n):
            m = psi[0, i, j]
            for s in range(1, n_slot):
                if psi[s, i, j] < m:
                    m = psi[s, i, j]
            phi[i, j] = m


@njit(cache=True, error_model="numpy")
def march(psi, phi, drift, hsrc, rates, exit_rate, slot_rate, slot_y,
          flexible, cost, shrink_lo, shrink_w, d, delta, dt, dx, eps,
          max_steps, tol, diverge_window):
    """Forward-Euler marching until ``max_steps`` or residual < ``tol``.

    ``psi`` (slot, regime, node) and ``phi`` (regime, node) are updated in
    place. The intervention targets are frozen from the incoming ``phi`` at
    each step; ``phi`` is refreshed as the slot-wise minimum afterwards.
    Returns (status, steps taken, final residual).
    """
    n_slot, n_reg, n = psi.shape
    keep = np.empty((n_reg, n))
    harv = np.empty((n_reg, n))
    best = np.empty((n_reg, n))
    rowres = np.empty(n_slot * n_reg)
    buf = np.empty_like(psi)
    mixed = np.empty_like(psi)
    cur = psi
    nxt = buf
    res = np.inf
    prev = np.inf
    growing = 0
    status = STATUS_HORIZON
    steps = 0
    for step in range(max_steps):
        _targets(phi, cost, shrink_lo, shrink_w, d, keep, harv, best)
        for s in range(n_slot):
            mixed[s] = np.dot(rates, cur[s])
        _euler(cur, nxt, drift, hsrc, mixed, exit_rate, slot_rate,
               slot_y, flexible, keep, harv, best, delta, dt, dx, eps, rowres)
        _slot_min(nxt, phi)
        tmp = cur
        cur = nxt
        nxt = tmp
        steps = step + 1
        res = rowres.max() / dt
        if not np.isfinite(res):
            status = STATUS_NONFINITE
            break
        if res > prev:
            growing += 1
            if growing >= diverge_window:
                status = STATUS_DIVERGED
                break
        else:
            growing = 0
        prev = res
        if res < tol:
            status = STATUS_CONVERGED
            break
    if steps % 2 == 1:
        psi[:] = cur
    return status, steps, res
