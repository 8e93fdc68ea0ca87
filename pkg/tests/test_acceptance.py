"""Acceptance criteria 1-10, one test each.

Every test records a PASS/FAIL line with the measured values; the lines are
repeated in the terminal summary. Set RSHARVEST_SKIP_FULL=1 to leave out the
full-resolution part of criterion 4.
"""

import math
import os
import time

import numpy as np
import pytest

from rsharvest.closed_form import closed_form_coefficients, oracle_error, reduced_numeric_config
from rsharvest.model import ModelParams, ControlProblem, synthetic_river_chain
from rsharvest.regimes import DischargeSeries, RegimeSpec, entropy, estimate_chain, synthesize_series
from rsharvest.schemes import weno3_biased_derivatives
from rsharvest.setups import (
    CI_GRID,
    ESTIMATOR_RATES,
    ESTIMATOR_SPEC,
    FULL_GRID,
    REDUCED_EXAMPLE,
    ci_problem,
    estimator_chain,
    full_problem,
    grid_for,
)
from rsharvest.simulator import (
    ALWAYS_HARVEST_HIGH,
    NEVER_HARVEST_LOW,
    ConstantPolicy,
    SimConfig,
    estimate_performance,
    ode_segment,
    ode_segment_rk4,
    policy_from_solution,
    simulate_path,
)
from rsharvest.solver import (
    INVARIANT_RTOL,
    Grid,
    check_invariants,
    extract_policy,
    harvest_region,
    solve_flexible,
    solve_inflexible,
)

SOLVES = []  # every solution produced here, for the invariant criterion
INVARIANT_KEYS = ("below_zero", "above_bound", "non_monotone", "min_identity", "intervention_bound")
SKIP_FULL = bool(os.environ.get("RSHARVEST_SKIP_FULL"))


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def _solve(kind, problem, grid, psi0=None):
    fn = solve_flexible if kind == "flexible" else solve_inflexible
    sol = fn(problem, grid, psi0=psi0)
    SOLVES.append(sol)
    return sol


def _within_dilation(small, big, cells=2):
    """Cells of ``small`` outside ``big`` widened by ``cells`` nodes along x."""
    grown = big.copy()
    for k in range(1, cells + 1):
        grown[:, k:] |= big[:, :-k]
        grown[:, :-k] |= big[:, k:]
    return int(np.sum(small & ~grown))


def test_criterion_1_closed_form_oracle(record):
    exact = closed_form_coefficients(REDUCED_EXAMPLE)
    errs, times = {}, {}
    for N in (201, 401, 801):
        problem, grid = reduced_numeric_config(REDUCED_EXAMPLE, N=N)
        sol, times[N] = _timed(_solve, "flexible", problem, grid)
        errs[N] = oracle_error(sol.phi, sol.x, exact)
    accurate = errs[401] <= 0.02
    decreasing = errs[201] > errs[401] > errs[801]
    fast = times[401] <= 60.0
    detail = (
        f"rel err N=201/401/801 = {errs[201]:.2e}/{errs[401]:.2e}/{errs[801]:.2e} "
        f"(tol 2e-2, strictly decreasing: {decreasing}); N=401 {times[401]:.1f}s"
    )
    ok = record(1, accurate and decreasing and fast, detail)
    assert accurate and fast, detail
    assert ok, detail


def test_criterion_2_analytic_degenerate_values(record):
    base = ci_problem()
    lo = base.lambdas[0]
    cases = {
        "constant disutility": (base.replace(h_scale=0.0, h_offset=1.0), (1 + lo * base.d) / base.delta),
        "pure observation": (base.replace(h_scale=0.0, h_offset=0.0), base.d * lo / base.delta),
    }
    parts, ok = [], True
    for name, (problem, target) in cases.items():
        grid = Grid(N=CI_GRID.N, dt=CI_GRID.dt, T=200.0)
        for kind in ("flexible", "inflexible"):
            sol, wall = _timed(_solve, kind, problem, grid)
            err = float(np.abs(sol.phi - target).max())
            ok &= err <= 1e-3 and wall <= 30.0
            parts.append(f"{name}/{kind}: target {target:.4f} err {err:.1e} {wall:.1f}s")
        assert np.all(extract_policy(sol).zstar == 0)
    record(2, ok, "; ".join(parts))
    assert ok


def test_criterion_4_comparison_and_voi(record):
    # CI scale: P sweep on 11 regimes, N = 101, dt = 0.002
    Ps = (5.0, 50.0, 200.0, 500.0)
    curves, parts, ok = [], [], True
    voi_min, x_dips, slowest = math.inf, {}, 0.0
    warm_f = warm_i = None
    for P in Ps:
        problem = ci_problem(P=P)
        t0 = time.perf_counter()
        f = _solve("flexible", problem, CI_GRID, psi0=warm_f)
        i = _solve("inflexible", problem, CI_GRID, psi0=warm_i)
        slowest = max(slowest, time.perf_counter() - t0)
        warm_f, warm_i = f.psi, i.psi
        v = i.phi - f.phi
        scale = max(np.abs(i.phi).max(), np.abs(f.phi).max())
        voi_min = min(voi_min, v.min() / scale)
        ok &= v.min() >= -1e-6 * scale
        dv = np.diff(v[0])
        x_dips[P] = float(dv.min())
        curves.append(v[0])
    curves = np.array(curves)
    tol = INVARIANT_RTOL * np.abs(curves).max()
    mono_P = bool(np.all(np.diff(curves, axis=0) >= -tol))
    mono_x = all(d >= -tol for d in x_dips.values())
    ok &= mono_P and mono_x and slowest <= 120.0
    parts.append(f"CI: min V/scale {voi_min:.1e}, V(0,.) nondecreasing in P: {mono_P}, "
                 f"in x: {mono_x} (min step by P: "
                 + ", ".join(f"{P:g}:{d:.1e}" for P, d in x_dips.items())
                 + f"), slowest VOI run {slowest:.1f}s")

    if SKIP_FULL:
        parts.append("full-resolution part skipped")
    else:
        problem = full_problem()
        t0 = time.perf_counter()
        f = _solve("flexible", problem, FULL_GRID)
        i = _solve("inflexible", problem, FULL_GRID, psi0=np.stack([f.psi[0], f.psi[0], f.psi[1], f.psi[1]]))
        wall = time.perf_counter() - t0
        v = i.phi - f.phi
        scale = max(np.abs(i.phi).max(), np.abs(f.phi).max())
        full_ok = v.min() >= -1e-6 * scale and wall <= 1800.0
        ok &= full_ok
        parts.append(f"full 41 regimes N=401: min V/scale {v.min() / scale:.1e}, "
                     f"residuals {f.residual:.1e}/{i.residual:.1e}, {wall:.0f}s")
    detail = "; ".join(parts)
    record(4, ok, detail)
    assert ok, detail


def _structure_problem(chain=None, **params):
    chain = chain or synthetic_river_chain(41)
    return ControlProblem.build(chain, ModelParams(**params))


def test_criterion_5_policy_structure(record):
    chains = {
        "river": synthetic_river_chain(41),
        "flashy river": synthetic_river_chain(41, flood_rate=0.02, rise_speed=0.5, recession=(1.0, 0.1)),
    }
    parts, ok = [], True
    for name, chain in chains.items():
        assert chain.stationary_distribution()[:17].sum() > 0.8
        problem = _structure_problem(chain)
        sol = _solve("flexible", problem, grid_for(problem))
        z = extract_policy(sol).zstar
        L = problem.L
        above = int(np.sum(z[L + 1:] > 0))
        low_large = [bool(z[i, -1] == problem.zbar) for i in range(0, 5)]
        ok &= above == 0 and all(low_large)
        first = [float(sol.x[np.argmax(z[i] > 0)]) for i in (0, 8, 16)]
        parts.append(f"{name}: harvest cells above L={L}: {above}; zbar at x=1 in regimes 0-4: "
                     f"{all(low_large)}; harvest threshold x in regimes 0/8/16 = "
                     + "/".join(f"{t:.2f}" for t in first))
    record(5, ok, "; ".join(parts))
    assert ok


def test_criterion_6_directional_sensitivity(record):
    def region(**params):
        problem = _structure_problem(**params)
        T = max(365.0 / 4.0, 20.0 / problem.delta)
        sol = _solve("flexible", problem, grid_for(problem, T=T))
        assert sol.residual < 1e-8, (params, sol.residual)
        return harvest_region(extract_policy(sol))

    base = region()
    mu = [region(mu=0.35), base, region(mu=0.65)]
    delta = [region(delta=0.3), base, region(delta=0.1)]
    m_sizes = {m: int(region(m=m).sum()) for m in (0.5, 1.0)} | {2.0: int(base.sum())}
    mu_viol = [_within_dilation(mu[k], mu[k + 1]) for k in range(2)]
    delta_viol = [_within_dilation(delta[k], delta[k + 1]) for k in range(2)]
    ok = sum(mu_viol) == 0 and sum(delta_viol) == 0
    detail = (
        f"mu 0.35->0.5->0.65 sizes {[int(r.sum()) for r in mu]} cells outside 2-cell dilation {mu_viol}; "
        f"delta 0.3->0.2->0.1 sizes {[int(r.sum()) for r in delta]} outside {delta_viol}; "
        f"m 0.5/1/2 sizes {[m_sizes[k] for k in (0.5, 1.0, 2.0)]} (reported only)"
    )
    record(6, ok, detail)
    assert ok, detail


def test_criterion_7_solver_simulator_consistency(record, ci_flexible):
    sol = ci_flexible
    SOLVES.append(sol)
    problem = sol.problem
    optimal = policy_from_solution(sol)
    parts, ok, slowest = [], True, 0.0
    for k, x0 in enumerate((0.25, 0.5, 0.75)):
        phi = float(np.interp(x0, sol.x, sol.phi[0]))
        cfg = SimConfig(i0=0, x0=x0, n_paths=100_000, seed=1000 * (k + 1))
        est, wall = _timed(estimate_performance, problem, optimal, cfg)
        slowest = max(slowest, wall)
        match = abs(est.mean - phi) <= 3 * est.se + 0.05 * phi
        line = f"x0={x0}: Phi {phi:.4f} MC {est.mean:.4f}+-{est.se:.4f}"
        for name, policy in (("never/low", NEVER_HARVEST_LOW), ("always/high", ALWAYS_HARVEST_HIGH)):
            h, wall = _timed(estimate_performance, problem, policy, cfg)
            slowest = max(slowest, wall)
            dominated = h.mean >= phi - 3 * h.se
            ok &= dominated
            line += f", {name} {h.mean:.4f}"
        ok &= match
        parts.append(line)
    ok &= slowest <= 300.0
    record(7, ok, "; ".join(parts) + f"; slowest 1e5-path run {slowest:.1f}s")
    assert ok


def test_criterion_8_simulator_micro_oracles(record, ci_flexible):
    problem = ci_problem().replace(h_scale=0.0, h_offset=0.0)
    est = estimate_performance(problem, ConstantPolicy(False, False), SimConfig(n_paths=100_000, seed=8))
    target = problem.d * problem.lambdas[0] / problem.delta
    poisson_ok = abs(est.mean - target) <= 3 * est.se

    rng = np.random.default_rng(8)
    full = full_problem()
    worst = 0.0
    for _ in range(2000):
        i = int(rng.integers(full.n_regimes))
        x0, t = float(rng.uniform(0, 1)), float(rng.uniform(0, 10))
        worst = max(worst, abs(ode_segment(full, i, x0, t) - ode_segment_rk4(full, i, x0, t)))
    ode_ok = worst <= 1e-8

    policy = policy_from_solution(ci_flexible)
    lo, hi = 1.0, 0.0
    for seed in range(300):
        ev = simulate_path(ci_flexible.problem, policy, SimConfig(x0=float(seed % 11) / 10), seed=seed).events
        if ev.size:
            lo = min(lo, ev["X_before"].min(), ev["X_after"].min())
            hi = max(hi, ev["X_before"].max(), ev["X_after"].max())
    range_ok = lo >= 0.0 and hi <= 1.0
    ok = poisson_ok and ode_ok and range_ok
    record(8, ok, f"Poisson sum {est.mean:.5f}+-{est.se:.5f} (target {target:.5f}); "
                  f"max |closed form - RK4| {worst:.1e}; path range [{lo:.3f}, {hi:.3f}]")
    assert ok


def test_criterion_9_estimator_round_trip(record):
    series = synthesize_series(estimator_chain(), 3 * 365.0, 1.0 / 24.0, seed=0)
    est = estimate_chain(series, ESTIMATOR_SPEC)
    nz = ESTIMATOR_RATES > 0
    rel = np.abs(est.rates[nz] - ESTIMATOR_RATES[nz]) / ESTIMATOR_RATES[nz]
    rates_ok = bool(np.all(rel <= 0.10))

    q = np.array([0.5, 0.5, 1.75, 1.75] * 500 + [0.5])
    sym = estimate_chain(DischargeSeries(np.arange(q.size) / 24.0, q, 1.0 / 24.0), RegimeSpec(I=1))
    H = entropy(sym)
    H_ok = abs(H - math.log(2)) <= 1e-9
    ok = rates_ok and H_ok
    record(9, ok, f"3-year round trip max rel rate error {rel.max():.3f} (tol 0.10; per rate "
                  + ", ".join(f"{r:.3f}" for r in rel)
                  + f"); symmetric 2-state entropy {H:.12f} vs ln 2 = {math.log(2):.12f}")
    assert ok


def test_criterion_10_weno_quality(record):
    worst_linear = 0.0
    rng = np.random.default_rng(10)
    for n in (5, 11, 101, 401):
        x = np.linspace(0, 1, n)
        for _ in range(20):
            a, b = rng.uniform(-1, 1, 2)
            pm, pp = weno3_biased_derivatives(a * x + b, x[1] - x[0])
            worst_linear = max(worst_linear, np.abs(pm - a).max(), np.abs(pp - a).max())
    errs = []
    for n in (101, 201, 401):
        x = np.linspace(0, 1, n)
        pm, pp = weno3_biased_derivatives(np.sin(2 * np.pi * x), x[1] - x[0])
        exact = 2 * np.pi * np.cos(2 * np.pi * x)
        sl = slice(2, n - 2)
        errs.append(max(np.abs(pm - exact)[sl].max(), np.abs(pp - exact)[sl].max()))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = worst_linear <= 1e-13 and bool(np.all(orders >= 2.0))
    record(10, ok, f"linear data max error {worst_linear:.1e}; observed orders "
                   + ", ".join(f"{o:.2f}" for o in orders))
    assert ok


def test_criterion_3_invariants_on_every_solve(record, ci_flexible, ci_inflexible):
    sols = SOLVES + [ci_flexible, ci_inflexible]
    totals = {k: 0 for k in INVARIANT_KEYS}
    for sol in sols:
        counts = check_invariants(sol)
        for k in INVARIANT_KEYS:
            totals[k] += counts[k]
    bound = ci_flexible.problem.value_bound()
    default_bound = full_problem().value_bound()
    ok = all(v == 0 for v in totals.values()) and abs(default_bound - 31.0 / 6.0) < 1e-12
    record(3, ok, f"{len(sols)} solves, violations {totals}; bound at field defaults {default_bound:.4f}")
    assert ok
