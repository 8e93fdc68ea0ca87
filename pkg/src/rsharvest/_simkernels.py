"""Numba kernels for event-driven path simulation."""

import math

import numpy as np
from numba import njit

POLICY_CONSTANT = 0
POLICY_FLEXIBLE = 1
POLICY_INFLEXIBLE = 2

EVENT_SWITCH = 0
EVENT_OBSERVATION = 1

_STACK = 200
_MAX_DEPTH = 60


@njit(cache=True, error_model="numpy")
def ode_closed(rho, kappa, x0, t):
    """Solution of x' = rho x - kappa x^2 from x0 after time t, clamped to [0, 1]."""
    if x0 <= 0.0 or t <= 0.0:
        return min(max(x0, 0.0), 1.0)
    a = rho * t
    if a > 700.0:
        # e^{rho t} overflows; use the decaying form
        e = math.exp(-a)
        x = rho * x0 / (rho * e + kappa * x0 * (1.0 - e))
    else:
        if abs(a) < 1e-10:
            growth = t * (1.0 + 0.5 * a)
        else:
            growth = math.expm1(a) / rho
        x = x0 * math.exp(a) / (1.0 + kappa * x0 * growth)
    return min(max(x, 0.0), 1.0)


@njit(cache=True, error_model="numpy")
def ode_rk4(rho, kappa, x0, t, substep):
    n = max(1, int(math.ceil(t / substep - 1e-12)))
    h = t / n
    x = x0
    for _ in range(n):
        k1 = rho * x - kappa * x * x
        y = x + 0.5 * h * k1
        k2 = rho * y - kappa * y * y
        y = x + 0.5 * h * k2
        k3 = rho * y - kappa * y * y
        y = x + h * k3
        k4 = rho * y - kappa * y * y
        x = x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    return min(max(x, 0.0), 1.0)


@njit(cache=True, error_model="numpy")
def _integrand(s, rho, kappa, x0, t0, delta, hs, hp, ho):
    x = ode_closed(rho, kappa, x0, s)
    if hs == 0.0:
        hx = ho
    else:
        hx = hs * x ** hp + ho
    return hx * math.exp(-delta * (t0 + s))


@njit(cache=True, error_model="numpy")
def discounted_disutility(rho, kappa, x0, t0, length, delta, hs, hp, ho, tol):
    """Adaptive Simpson for the integral of h(X(s)) exp(-delta (t0 + s)) over [0, length]."""
    if length <= 0.0:
        return 0.0
    sa = np.empty(_STACK)
    sb = np.empty(_STACK)
    sfa = np.empty(_STACK)
    sfm = np.empty(_STACK)
    sfb = np.empty(_STACK)
    swhole = np.empty(_STACK)
    stol = np.empty(_STACK)
    sdepth = np.empty(_STACK, dtype=np.int64)
    fa = _integrand(0.0, rho, kappa, x0, t0, delta, hs, hp, ho)
    fb = _integrand(length, rho, kappa, x0, t0, delta, hs, hp, ho)
    fm = _integrand(0.5 * length, rho, kappa, x0, t0, delta, hs, hp, ho)
    top = 0
    sa[0] = 0.0
    sb[0] = length
    sfa[0] = fa
    sfm[0] = fm
    sfb[0] = fb
    swhole[0] = length * (fa + 4.0 * fm + fb) / 6.0
    stol[0] = tol
    sdepth[0] = 0
    total = 0.0
    while top >= 0:
        a = sa[top]
        b = sb[top]
        fa = sfa[top]
        fm = sfm[top]
        fb = sfb[top]
        whole = swhole[top]
        eps = stol[top]
        depth = sdepth[top]
        top -= 1
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = _integrand(lm, rho, kappa, x0, t0, delta, hs, hp, ho)
        frm = _integrand(rm, rho, kappa, x0, t0, delta, hs, hp, ho)
        left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
        right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
        diff = left + right - whole
        if depth >= _MAX_DEPTH or abs(diff) <= 15.0 * eps or top + 2 >= _STACK:
            total += left + right + diff / 15.0
        else:
            top += 1
            sa[top] = a
            sb[top] = m
            sfa[top] = fa
            sfm[top] = flm
            sfb[top] = fm
            swhole[top] = left
            stol[top] = 0.5 * eps
            sdepth[top] = depth + 1
            top += 1
            sa[top] = m
            sb[top] = b
            sfa[top] = fm
            sfm[top] = frm
            sfb[top] = fb
            swhole[top] = right
            stol[top] = 0.5 * eps
            sdepth[top] = depth + 1
    return total


@njit(cache=True, error_model="numpy")
def _interp(field, i, x, dx, n):
    pos = x / dx
    k = int(pos)
    if k >= n - 1:
        k = n - 2
    if k < 0:
        k = 0
    w = pos - k
    return (1.0 - w) * field[i, k] + w * field[i, k + 1]


@njit(cache=True, error_model="numpy")
def _argmin_slots(psi, i, x, dx, n):
    best = 0
    bv = _interp(psi[0], i, x, dx, n)
    for s in range(1, psi.shape[0]):
        v = _interp(psi[s], i, x, dx, n)
        if v < bv:
            bv = v
            best = s
    return best


@njit(cache=True, error_model="numpy")
def _next_regime(cum, i):
    u = np.random.random()
    n = cum.shape[1]
    for j in range(n):
        if u < cum[i, j]:
            return j
    # rounding in the cumulative row: take the last reachable regime
    for j in range(n - 1, -1, -1):
        if j != i and (j == 0 or cum[i, j] > cum[i, j - 1]):
            return j
    return i


@njit(cache=True, error_model="numpy")
def run_path(seed, i0, x0, horizon, exit_rate, cum, rho, kappa, delta, d, K0, K1,
             P, L, zbar, lam, hs, hp, ho, kind, const_z, const_l, phi, psi, dx, n,
             quad_tol, log_events, ev_t, ev_kind, ev_reg, ev_xb, ev_xa, ev_z, ev_lam):
    """Simulate one path; returns (disutility, observation, harvest, n_events)."""
    np.random.seed(seed)
    t = 0.0
    i = i0
    x = x0
    committed = const_z
    if kind == POLICY_CONSTANT:
        li = const_l
    elif kind == POLICY_FLEXIBLE:
        li = _argmin_slots(psi, i, x, dx, n)
    else:
        k = _argmin_slots(psi, i, x, dx, n)
        li = k // 2
        committed = k % 2
    q = exit_rate[i]
    t_switch = t + np.random.exponential(1.0 / q) if q > 0.0 else np.inf
    t_obs = t + np.random.exponential(1.0 / lam[li])
    dis = 0.0
    obs = 0.0
    harv = 0.0
    n_ev = 0
    cap = ev_t.shape[0]
    while True:
        t_next = min(t_switch, t_obs, horizon)
        dis += discounted_disutility(rho[i], kappa[i], x, t, t_next - t, delta, hs, hp, ho, quad_tol)
        x = ode_closed(rho[i], kappa[i], x, t_next - t)
        t = t_next
        if t >= horizon:
            break
        if t_switch <= t_obs:
            i = _next_regime(cum, i)
            q = exit_rate[i]
            t_switch = t + np.random.exponential(1.0 / q) if q > 0.0 else np.inf
            if log_events and n_ev < cap:
                ev_t[n_ev] = t
                ev_kind[n_ev] = 0
                ev_reg[n_ev] = i
                ev_xb[n_ev] = x
                ev_xa[n_ev] = x
                ev_z[n_ev] = 0.0
                ev_lam[n_ev] = lam[li]
            n_ev += 1
            continue
        # observation
        if kind == POLICY_CONSTANT:
            z = const_z
        elif kind == POLICY_FLEXIBLE:
            keep = _interp(phi, i, x, dx, n)
            cut = _interp(phi, i, (1.0 - zbar) * x, dx, n) + (K0 + K1 * x * zbar) * (P if i > L else 1.0)
            z = 1 if cut < keep else 0
        else:
            z = committed
        disc = math.exp(-delta * t)
        obs += disc * d
        xb = x
        if z == 1:
            harv += disc * (K0 + K1 * x * zbar) * (P if i > L else 1.0)
            x = (1.0 - zbar) * x
        if kind == POLICY_FLEXIBLE:
            li = _argmin_slots(psi, i, x, dx, n)
        elif kind == POLICY_INFLEXIBLE:
            k = _argmin_slots(psi, i, x, dx, n)
            li = k // 2
            committed = k % 2
        t_obs = t + np.random.exponential(1.0 / lam[li])
        if log_events and n_ev < cap:
            ev_t[n_ev] = t
            ev_kind[n_ev] = 1
            ev_reg[n_ev] = i
            ev_xb[n_ev] = xb
            ev_xa[n_ev] = x
            ev_z[n_ev] = zbar if z == 1 else 0.0
            ev_lam[n_ev] = lam[li]
        n_ev += 1
    return dis, obs, harv, n_ev


@njit(cache=True, error_model="numpy")
def run_paths(base_seed, n_paths, i0, x0, horizon, exit_rate, cum, rho, kappa, delta,
              d, K0, K1, P, L, zbar, lam, hs, hp, ho, kind, const_z, const_l, phi,
              psi, dx, n, quad_tol):
    dis = np.empty(n_paths)
    obs = np.empty(n_paths)
    harv = np.empty(n_paths)
    ev_f = np.empty(0)
    ev_i = np.empty(0, dtype=np.int64)
    for p in range(n_paths):
        seed = (base_seed + p) % 4294967296
        a, b, c, _ = run_path(seed, i0, x0, horizon, exit_rate, cum, rho, kappa, delta,
                              d, K0, K1, P, L, zbar, lam, hs, hp, ho, kind, const_z,
                              const_l, phi, psi, dx, n, quad_tol, False,
                              ev_f, ev_i, ev_i, ev_f, ev_f, ev_f, ev_f)
        dis[p] = a
        obs[p] = b
        harv[p] = c
    return dis, obs, harv


@njit(cache=True, error_model="numpy")
def sample_regimes(seed, i0, duration, step, exit_rate, cum):
    """Regime occupied at times 0, step, 2 step, ... < duration."""
    np.random.seed(seed)
    n = int(math.floor(duration / step + 1e-9))
    out = np.empty(n, dtype=np.int64)
    i = i0
    q = exit_rate[i]
    t_switch = np.random.exponential(1.0 / q) if q > 0.0 else np.inf
    for k in range(n):
        tk = k * step
        while t_switch <= tk:
            i = _next_regime(cum, i)
            q = exit_rate[i]
            t_switch = t_switch + np.random.exponential(1.0 / q) if q > 0.0 else np.inf
        out[k] = i
    return out
