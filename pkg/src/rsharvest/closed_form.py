"""Exact solution of the reduced two-regime model.

With linear drift ``f_i x``, disutility ``h = x``, no observation or fixed
cost, a single observation intensity ``r`` and harvest cost ``K z x``
(``P K z x`` in the flood regime 1), the value function is linear,
``Phi_i(x) = C_i x``, and the slopes solve

    (delta - f_i + w_i) C_i - w_i C_{1-i} = 1 + r * min_z z (K_i - C_i),

with ``K_0 = K`` and ``K_1 = P K``. Harvesting only in regime 0 gives an
explicit solution; it is the true one when ``C_0 > K`` and ``C_1 <= P K``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ControlProblem, RegimeChain
from .solver import Grid

log = logging.getLogger(__name__)

SYSTEM_RTOL = 1e-10


@dataclass(frozen=True)
class ReducedParams:
    f0: float
    f1: float
    w01: float
    w10: float
    delta: float
    r: float
    zbar: float
    K: float
    P: float

    def __post_init__(self):
        if self.delta <= 0 or self.r <= 0:
            raise ValueError("need delta > 0 and r > 0")
        if self.w01 < 0 or self.w10 < 0:
            raise ValueError("switching rates must be nonnegative")
        if not (0 <= self.zbar < 1):
            raise ValueError("need 0 <= zbar < 1")
        if self.K <= 0 or self.P <= 1:
            raise ValueError("need K > 0 and P > 1")

    @property
    def A(self):
        """delta - f0 + w01 + r zbar: regime-0 diagonal under the harvest pattern."""
        return self.delta - self.f0 + self.w01 + self.r * self.zbar

    @property
    def B(self):
        """delta - f1 + w10: regime-1 diagonal (no harvest)."""
        return self.delta - self.f1 + self.w10

    @property
    def determinant(self):
        return self.A * self.B - self.w01 * self.w10


@dataclass
class ReducedSolution:
    C0: float
    C1: float
    pattern_valid: bool
    residual: float
    direct_solve_used: bool = False
    conditions: dict = field(default_factory=dict)


def _system(p: ReducedParams, z0: float, z1: float):
    """Matrix and right-hand side of the slope equations for a fixed harvest choice."""
    a = np.array([
        [p.delta - p.f0 + p.w01 + p.r * z0, -p.w01],
        [-p.w10, p.delta - p.f1 + p.w10 + p.r * z1],
    ])
    b = np.array([1.0 + p.r * z0 * p.K, 1.0 + p.r * z1 * p.P * p.K])
    return a, b


def slope_residual(p: ReducedParams, c0: float, c1: float) -> float:
    """Residual of the full (min-over-z) slope equations at (c0, c1)."""
    out = 0.0
    for i, (ci, cj, w, f, k) in enumerate(
        [(c0, c1, p.w01, p.f0, p.K), (c1, c0, p.w10, p.f1, p.P * p.K)]
    ):
        lhs = (p.delta - f + w) * ci - w * cj
        rhs = 1.0 + p.r * min(0.0, p.zbar * (k - ci))
        out = max(out, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return out


def closed_form_coefficients(p: ReducedParams) -> ReducedSolution:
    """Slopes (C0, C1) for the pattern "harvest in regime 0 only"."""
    L = p.determinant
    if not L > 0:
        raise ValueError(f"determinant L = {L:.6g} must be positive")
    c0 = (p.B * (1.0 + p.r * p.K * p.zbar) + p.w01) / L
    c1 = (p.delta - p.f0 + p.w01 + p.r * p.zbar + p.w10 * (1.0 + p.r * p.K * p.zbar)) / L

    a, b = _system(p, p.zbar, 0.0)
    lin_res = float(np.max(np.abs(a @ np.array([c0, c1]) - b)) / max(1.0, np.abs(b).max()))
    direct = False
    if lin_res > SYSTEM_RTOL:
        log.warning("explicit slopes miss the linear system by %.3e; using the direct solve", lin_res)
        c0, c1 = np.linalg.solve(a, b)
        lin_res = float(np.max(np.abs(a @ np.array([c0, c1]) - b)) / max(1.0, np.abs(b).max()))
        direct = True

    sol = ReducedSolution(C0=float(c0), C1=float(c1), pattern_valid=False,
                          residual=lin_res, direct_solve_used=direct)
    sol.conditions = check_threshold_conditions(p, sol)
    sol.pattern_valid = sol.conditions["C0_above_K"] and sol.conditions["C1_below_PK"]
    return sol


def check_threshold_conditions(p: ReducedParams, sol: ReducedSolution) -> dict:
    """Evaluate the harvest-pattern feasibility conditions."""
    L = p.determinant
    numer = p.delta - p.f0 + p.w01 + p.r * p.zbar + p.w10 * (1.0 + p.r * p.K * p.zbar)
    min_P = numer / (L * p.K)
    return {
        "C0_above_K": sol.C0 > p.K,
        # only the C1 bound is needed; the C0 variant is kept for comparison
        "C0_below_PK": sol.C0 <= p.P * p.K,
        "C1_below_PK": sol.C1 <= p.P * p.K,
        "small_K": (L - p.B * p.r * p.zbar) * p.K < p.B + p.w01,
        "large_P": p.P >= min_P,
        "min_P": min_P,
        "determinant": L,
    }


def brute_force_slopes(p: ReducedParams):
    """Enumerate the four harvest patterns and keep the self-consistent ones.

    Independent of the explicit formulas: each pattern fixes a linear
    system, which is solved densely and then checked against the min-over-z
    equations.
    """
    found = []
    for z0, z1 in itertools.product((0.0, p.zbar), repeat=2):
        a, b = _system(p, z0, z1)
        try:
            c = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            continue
        if slope_residual(p, c[0], c[1]) < 1e-9:
            found.append(((z0, z1), float(c[0]), float(c[1])))
    return found


def reduced_problem(p: ReducedParams) -> ControlProblem:
    """Two-regime problem with linear drift, h = x, d = K0 = 0, cost K z x."""
    chain = RegimeChain([1.0, 2.0], [[0.0, p.w01], [p.w10, 0.0]])
    return ControlProblem(
        chain=chain,
        rho=np.array([p.f0, p.f1]),
        kappa=0.0,
        delta=p.delta,
        d=0.0,
        K0=0.0,
        K1=p.K,
        P=p.P,
        L=0,
        zbar=p.zbar,
        lambdas=(p.r, p.r),
        h_scale=1.0,
        h_power=1.0,
        h_offset=0.0,
        label="reduced",
    )


def reduced_numeric_config(p: ReducedParams, N=401, cfl=0.4, T=None, tol_ss=1e-11):
    """(problem, grid) for checking the marching solver against the exact slopes."""
    sol = closed_form_coefficients(p)
    if not sol.pattern_valid:
        raise ValueError(f"harvest pattern infeasible for these parameters: {sol.conditions}")
    problem = reduced_problem(p)
    dx = 1.0 / (N - 1)
    fmax = max(abs(p.f0), abs(p.f1), 1e-12)
    rate = p.delta + p.r + max(p.w01, p.w10)
    dt = cfl / (fmax / dx + rate)
    if T is None:
        # slowest decay of the linear slope dynamics sets the horizon
        ev = np.linalg.eigvals(_system(p, p.zbar, 0.0)[0]).real.min()
        T = math.log(1e12) / max(ev, 1e-3)
    return problem, Grid(N=N, dt=dt, T=T, tol_ss=tol_ss)


def oracle_error(phi: np.ndarray, x: np.ndarray, sol: ReducedSolution, window=(0.05, 0.5)):
    """Max relative error of Phi(i, x)/x against C_i over the window."""
    sel = (x >= window[0] - 1e-12) & (x <= window[1] + 1e-12)
    c = np.array([sol.C0, sol.C1])[:, None]
    return float(np.max(np.abs(phi[:, sel] / x[sel] - c) / c))
