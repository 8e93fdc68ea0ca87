"""Pseudo-time marching solver for the flexible and inflexible optimality systems.

For each auxiliary slot s (an observation intensity r, plus a committed
harvest fraction y in the inflexible case) the field Psi_s(i, x) is marched
with forward Euler,

    Psi <- Psi + dt * [ -delta Psi - H(f, p-, p+) - sum_k w_ik (Psi_i - Psi_k)
                        + h(x) - r (Psi - target_s) ],

where the numerical Hamiltonian H upwinds the drift with WENO3 one-sided
derivatives. The target is the intervention value M Phi (flexible) or
Phi(i, (1-y)x) + d + K(i, x, y) (inflexible), frozen from the incoming Phi.
After each step Phi is reset to the slot-wise minimum of Psi.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import ControlProblem
from .schemes import WENO_EPS, llxf_hamiltonian, weno3_biased_derivatives

log = logging.getLogger(__name__)

INVARIANT_RTOL = 1e-8
VOI_RTOL = 1e-6


class StabilityError(ValueError):
    """The explicit time step violates the stability bound."""


class DivergenceError(RuntimeError):
    """Marching produced non-finite values or a persistently growing residual."""


@dataclass(frozen=True)
class Grid:
    """Uniform nodes on [0, 1] plus pseudo-time stepping controls."""

    N: int = 401
    dt: float = 0.0003
    T: float = 365.0 / 4.0
    tol_ss: float = 1e-9
    eps: float = WENO_EPS
    diverge_window: int = 1000

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 5:
            raise ValueError("grid needs an integer N >= 5")
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("need dt > 0 and T > 0")
        object.__setattr__(self, "N", int(self.N))

    @property
    def dx(self) -> float:
        return 1.0 / (self.N - 1)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N) * self.dx

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.T / self.dt - 1e-9))

    def stability_number(self, problem: ControlProblem) -> float:
        fmax = float(np.abs(problem.drift(self.x)).max())
        wmax = float(problem.chain.exit_rates().max())
        return self.dt * (fmax / self.dx + problem.delta + problem.lambdas[1] + wmax)

    def check_stability(self, problem: ControlProblem) -> float:
        cfl = self.stability_number(problem)
        if cfl > 1.0:
            log.warning("stability number %.4f exceeds 1 (dt=%g, N=%d)", cfl, self.dt, self.N)
            raise StabilityError(
                f"explicit step unstable: dt*(max|f|/dx + delta + lambda_hi + max exit rate) = {cfl:.4f} > 1"
            )
        return cfl


def flexible_slots(problem: ControlProblem):
    lo, hi = problem.lambdas
    return [(lo, 0.0), (hi, 0.0)]


def inflexible_slots(problem: ControlProblem):
    lo, hi = problem.lambdas
    z = problem.zbar
    return [(lo, 0.0), (lo, z), (hi, 0.0), (hi, z)]


@dataclass
class Solution:
    """Converged (or horizon-limited) fields of one solve.

    ``psi`` is stored slot-major, shape (n_slots, n_regimes, N). The slot
    list pairs (r, y): y is always 0 for the flexible system.
    """

    kind: str
    problem: ControlProblem
    grid: Grid
    phi: np.ndarray
    psi: np.ndarray
    slots: list
    steps: int = 0
    residual: float = math.inf
    converged: bool = False
    wall_time: float = 0.0
    stability: float = 0.0
    checks: dict = field(default_factory=dict)

    @property
    def x(self):
        return self.grid.x

    @property
    def t_final(self):
        return self.steps * self.grid.dt

    @property
    def aux(self) -> np.ndarray:
        """Psi indexed [i, j, r] (flexible) or [i, j, r, y] (inflexible)."""
        a = np.moveaxis(self.psi, 0, -1)
        if self.kind == "inflexible":
            return a.reshape(a.shape[:2] + (2, 2))
        return a

    def diagnostics(self) -> dict:
        return {
            "kind": self.kind,
            "steps": self.steps,
            "t_final": self.t_final,
            "residual": self.residual,
            "converged": self.converged,
            "stability_number": self.stability,
            "wall_time_s": self.wall_time,
            **self.checks,
        }


def _shrink_interp(grid: Grid, zbar: float):
    """Left node and weight for linear interpolation at (1 - zbar) * x_j."""
    pos = (1.0 - zbar) * grid.x / grid.dx
    lo = np.floor(pos + 1e-12).astype(np.int64)
    lo = np.clip(lo, 0, grid.N - 2)
    w = pos - lo
    w[np.abs(w) < 1e-12] = 0.0
    return lo, w


def shrink_values(phi: np.ndarray, grid: Grid, zbar: float) -> np.ndarray:
    """Phi(i, (1 - zbar) x_j) by piecewise-linear interpolation."""
    lo, w = _shrink_interp(grid, zbar)
    return (1.0 - w) * phi[:, lo] + w * phi[:, lo + 1]


def apply_intervention_operator(phi, problem: ControlProblem, grid: Grid):
    """M Phi = min over z of Phi(i, (1-z)x) + d + K(i, x, z), with the argmin.

    Ties go to z = 0. Returns ``(M Phi, zstar)`` with zstar in {0, zbar}.
    """
    phi = np.asarray(phi, dtype=float)
    keep = phi + problem.d
    harv = shrink_values(phi, grid, problem.zbar) + problem.d + problem.harvest_cost(grid.x)
    take = harv < keep
    return np.where(take, harv, keep), np.where(take, problem.zbar, 0.0)


def _switch_term(psi, rates):
    """sum_k w_ik (Psi_i - Psi_k) for psi shaped (..., regime, node)."""
    return rates.sum(axis=1)[:, None] * psi - np.einsum("ik,...kj->...ij", rates, psi)


def _euler_reference(psi, targets, rates_per_slot, problem, grid):
    x = grid.x
    f = problem.drift(x)
    pm, pp = weno3_biased_derivatives(psi, grid.dx, eps=grid.eps)
    ham = llxf_hamiltonian(f, pm, pp)
    r = np.asarray(rates_per_slot)[:, None, None]
    rhs = (
        -problem.delta * psi
        - ham
        - _switch_term(psi, problem.chain.rates)
        + problem.disutility(x)[None, None, :]
        - r * (psi - targets)
    )
    return psi + grid.dt * rhs


def step_flexible(psi, phi, problem: ControlProblem, grid: Grid):
    """One explicit step of the flexible system (vectorized numpy reference).

    ``psi`` has shape (2, n_regimes, N) for (lambda_lo, lambda_hi).
    Returns the updated ``(psi, phi)``; inputs are not modified.
    """
    mphi, _ = apply_intervention_operator(phi, problem, grid)
    new = _euler_reference(psi, mphi[None], problem.lambdas, problem, grid)
    if not np.all(np.isfinite(new)):
        raise DivergenceError("non-finite values after one flexible step; check the stability number")
    return new, new.min(axis=0)


def step_inflexible(psi, phi, problem: ControlProblem, grid: Grid):
    """One explicit step of the inflexible system; ``psi`` has 4 slots."""
    keep = phi + problem.d
    harv = shrink_values(phi, grid, problem.zbar) + problem.d + problem.harvest_cost(grid.x)
    slots = inflexible_slots(problem)
    targets = np.stack([keep if y == 0 else harv for _, y in slots])
    new = _euler_reference(psi, targets, [r for r, _ in slots], problem, grid)
    if not np.all(np.isfinite(new)):
        raise DivergenceError("non-finite values after one inflexible step; check the stability number")
    return new, new.min(axis=0)


def _solve(kind, problem: ControlProblem, grid: Grid, psi0=None, max_steps=None):
    cfl = grid.check_stability(problem)
    slots = flexible_slots(problem) if kind == "flexible" else inflexible_slots(problem)
    shape = (len(slots), problem.n_regimes, grid.N)
    if psi0 is None:
        psi = np.zeros(shape)
    else:
        psi = np.array(psi0, dtype=float, copy=True)
        if psi.shape != shape:
            raise ValueError(f"warm start has shape {psi.shape}, expected {shape}")
    phi = psi.min(axis=0)
    x = grid.x
    lo, w = _shrink_interp(grid, problem.zbar)
    n_steps = grid.n_steps if max_steps is None else int(max_steps)

    t0 = time.perf_counter()
    status, steps, res = _kernels.march(
        psi, phi,
        np.ascontiguousarray(problem.drift(x)),
        np.ascontiguousarray(problem.disutility(x)),
        np.ascontiguousarray(problem.chain.rates),
        np.ascontiguousarray(problem.chain.exit_rates()),
        np.array([r for r, _ in slots]),
        np.array([0 if y == 0 else 1 for _, y in slots], dtype=np.int64),
        kind == "flexible",
        np.ascontiguousarray(problem.harvest_cost(x)),
        lo, w,
        float(problem.d), float(problem.delta), float(grid.dt), float(grid.dx), float(grid.eps),
        n_steps, float(grid.tol_ss), int(grid.diverge_window),
    )
    wall = time.perf_counter() - t0
    if status == _kernels.STATUS_NONFINITE:
        raise DivergenceError(
            f"{kind} solve produced non-finite values after {steps} steps (stability number {cfl:.4f})"
        )
    if status == _kernels.STATUS_DIVERGED:
        raise DivergenceError(
            f"{kind} solve residual grew for {grid.diverge_window} consecutive steps "
            f"(step {steps}, residual {res:.3e}, stability number {cfl:.4f})"
        )
    sol = Solution(
        kind=kind, problem=problem, grid=grid, phi=phi, psi=psi, slots=slots,
        steps=int(steps), residual=float(res),
        converged=status == _kernels.STATUS_CONVERGED,
        wall_time=wall, stability=cfl,
    )
    sol.checks = check_invariants(sol)
    log.info(
        "%s solve: %d steps, t=%.3f, residual %.3e, %.1fs",
        kind, sol.steps, sol.t_final, sol.residual, wall,
    )
    return sol


def solve_flexible(problem: ControlProblem, grid: Grid, psi0=None, max_steps=None) -> Solution:
    """March the flexible system from Psi = 0 (or ``psi0``) to T or steady state."""
    return _solve("flexible", problem, grid, psi0, max_steps)


def solve_inflexible(problem: ControlProblem, grid: Grid, psi0=None, max_steps=None) -> Solution:
    """March the inflexible (harvest committed one observation ahead) system."""
    return _solve("inflexible", problem, grid, psi0, max_steps)


def check_invariants(sol: Solution, rtol=INVARIANT_RTOL) -> dict:
    """Count violations of boundedness, monotonicity, min-identity and M Phi <= Phi + d."""
    p = sol.problem
    phi = sol.phi
    bound = p.value_bound()
    scale = max(bound, float(np.abs(phi).max()), 1e-300)
    tol = rtol * scale
    mphi, _ = apply_intervention_operator(phi, p, sol.grid)
    return {
        "value_bound": bound,
        "phi_min": float(phi.min()),
        "phi_max": float(phi.max()),
        "below_zero": int(np.sum(phi < -tol)),
        "above_bound": int(np.sum(phi > bound + tol)),
        "non_monotone": int(np.sum(np.diff(phi, axis=1) < -tol)),
        "min_identity": int(np.sum(np.abs(phi - sol.psi.min(axis=0)) > tol)),
        "intervention_bound": int(np.sum(mphi > phi + p.d + tol)),
        "tolerance": tol,
    }


@dataclass
class PolicyField:
    """Optimal decisions on the grid.

    Flexible: ``zstar`` is the harvest applied at an observation made at
    (i, x) and ``lamstar`` the intensity chosen at post-harvest state (i, x).
    Inflexible: both entries are the pair committed at (i, x) for the next
    observation.
    """

    kind: str
    x: np.ndarray
    zstar: np.ndarray
    lamstar: np.ndarray


def extract_policy(sol: Solution) -> PolicyField:
    p = sol.problem
    lo, hi = p.lambdas
    if sol.kind == "flexible":
        _, zstar = apply_intervention_operator(sol.phi, p, sol.grid)
        # strict comparison keeps lambda_lo on ties
        lamstar = np.where(sol.psi[1] < sol.psi[0], hi, lo)
    else:
        k = np.argmin(sol.psi, axis=0)  # first slot wins ties: (lo, 0) preferred
        rates = np.array([r for r, _ in sol.slots])
        ys = np.array([y for _, y in sol.slots])
        lamstar, zstar = rates[k], ys[k]
    return PolicyField(sol.kind, sol.x.copy(), zstar, lamstar)


def voi(phi_inflexible, phi_flexible, rtol=VOI_RTOL) -> np.ndarray:
    """Value of information V = Phi_inflexible - Phi_flexible.

    Raises ValueError if V is negative beyond ``rtol`` times the field scale,
    which would contradict the flexible structure dominating.
    """
    a = np.asarray(phi_inflexible, dtype=float)
    b = np.asarray(phi_flexible, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"field shapes differ: {a.shape} vs {b.shape}")
    v = a - b
    scale = max(float(np.abs(a).max()), float(np.abs(b).max()), 1e-300)
    if v.size and v.min() < -rtol * scale:
        raise ValueError(f"negative value of information {v.min():.3e} (scale {scale:.3e})")
    return v


def harvest_region(policy: PolicyField) -> np.ndarray:
    return policy.zstar > 0
