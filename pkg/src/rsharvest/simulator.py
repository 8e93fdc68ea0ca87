"""Monte Carlo evaluation of observation/harvest policies.

Between events the population follows the closed-form logistic solution of
its current regime. Two exponential clocks run: the regime clock (redrawn at
every switch) and the observation clock (redrawn at every observation from
the intensity just committed). At an observation the discounted observation
cost and harvest cost are charged and the harvest is applied. A regime switch
that coincides with an observation is processed first.

Paths are independent; path ``k`` is seeded with ``base_seed + k``, so the
result does not depend on how paths are scheduled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _simkernels as K
from .model import ControlProblem, RegimeChain
from .solver import Solution

TRUNCATION = 1e-8


def default_horizon(delta: float) -> float:
    """Smallest multiple of 10 days with exp(-delta T) <= 1e-8."""
    return 10.0 * math.ceil(math.log(1.0 / TRUNCATION) / delta / 10.0)


@dataclass(frozen=True)
class SimConfig:
    i0: int = 0
    x0: float = 0.5
    T_sim: float | None = None
    n_paths: int = 1000
    seed: int = 0
    ode_substep: float = 1e-3
    quad_tol: float = 1e-10

    def __post_init__(self):
        if not 0.0 <= self.x0 <= 1.0:
            raise ValueError("x0 must lie in [0, 1]")
        if self.n_paths < 1:
            raise ValueError("need at least one path")

    def horizon(self, delta: float) -> float:
        T = default_horizon(delta) if self.T_sim is None else float(self.T_sim)
        if math.exp(-delta * T) > TRUNCATION * (1 + 1e-9):
            raise ValueError(
                f"T_sim={T} truncates too early: exp(-delta T) = {math.exp(-delta * T):.2e} > {TRUNCATION}"
            )
        return T


# -- policies -----------------------------------------------------------------


@dataclass(frozen=True)
class ConstantPolicy:
    """Same harvest choice and intensity at every observation."""

    harvest: bool
    high_intensity: bool
    inflexible: bool = False

    def decide(self, problem: ControlProblem, i: int, x: float):
        z = problem.zbar if self.harvest else 0.0
        return z, problem.lambdas[int(self.high_intensity)]


@dataclass(frozen=True)
class FlexiblePolicy:
    """Harvest chosen from the value field at the observation; intensity from Psi.

    ``decide`` returns the harvest applied at an observation of (i, x) and the
    intensity then chosen at the post-harvest state.
    """

    phi: np.ndarray
    psi: np.ndarray
    inflexible = False

    def decide(self, problem: ControlProblem, i: int, x: float):
        n = self.phi.shape[1]
        dx = 1.0 / (n - 1)
        keep = K._interp(self.phi, i, x, dx, n)
        cut = K._interp(self.phi, i, (1 - problem.zbar) * x, dx, n) + problem.harvest_cost(np.array([x]))[i, 0]
        z = problem.zbar if cut < keep else 0.0
        xa = (1 - z) * x
        return z, problem.lambdas[K._argmin_slots(self.psi, i, xa, dx, n)]


@dataclass(frozen=True)
class InflexiblePolicy:
    """(intensity, next harvest) committed jointly from the four-slot Psi."""

    psi: np.ndarray
    inflexible = True

    def decide(self, problem: ControlProblem, i: int, x: float):
        n = self.psi.shape[2]
        k = K._argmin_slots(self.psi, i, x, 1.0 / (n - 1), n)
        return (problem.zbar if k % 2 else 0.0), problem.lambdas[k // 2]


def policy_from_solution(sol: Solution):
    if sol.kind == "flexible":
        return FlexiblePolicy(np.ascontiguousarray(sol.phi), np.ascontiguousarray(sol.psi))
    return InflexiblePolicy(np.ascontiguousarray(sol.psi))


NEVER_HARVEST_LOW = ConstantPolicy(harvest=False, high_intensity=False)
ALWAYS_HARVEST_HIGH = ConstantPolicy(harvest=True, high_intensity=True)


def _encode(policy):
    empty2 = np.zeros((1, 2))
    empty3 = np.zeros((1, 1, 2))
    if isinstance(policy, ConstantPolicy):
        return K.POLICY_CONSTANT, int(policy.harvest), int(policy.high_intensity), empty2, empty3, 1.0, 2
    if isinstance(policy, FlexiblePolicy):
        n = policy.phi.shape[1]
        return K.POLICY_FLEXIBLE, 0, 0, policy.phi, policy.psi, 1.0 / (n - 1), n
    if isinstance(policy, InflexiblePolicy):
        n = policy.psi.shape[2]
        return K.POLICY_INFLEXIBLE, 0, 0, empty2, policy.psi, 1.0 / (n - 1), n
    raise TypeError(f"unsupported policy {policy!r}")


def _cumulative(chain: RegimeChain):
    q = chain.exit_rates()
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(q[:, None] > 0, chain.rates / q[:, None], 0.0)
    return q, np.cumsum(probs, axis=1)


def _kernel_args(problem: ControlProblem, policy, config: SimConfig):
    q, cum = _cumulative(problem.chain)
    kind, cz, cl, phi, psi, dx, n = _encode(policy)
    if not 0 <= config.i0 < problem.n_regimes:
        raise ValueError(f"initial regime {config.i0} out of range")
    return dict(
        i0=int(config.i0), x0=float(config.x0), horizon=config.horizon(problem.delta),
        exit_rate=q, cum=cum, rho=problem.rho, kappa=problem.kappa,
        delta=float(problem.delta), d=float(problem.d), K0=float(problem.K0),
        K1=float(problem.K1), P=float(problem.P), L=int(problem.L), zbar=float(problem.zbar),
        lam=np.array(problem.lambdas, dtype=float), hs=float(problem.h_scale),
        hp=float(problem.h_power), ho=float(problem.h_offset), kind=kind, const_z=cz,
        const_l=cl, phi=np.ascontiguousarray(phi, dtype=float),
        psi=np.ascontiguousarray(psi, dtype=float), dx=dx, n=n, quad_tol=float(config.quad_tol),
    )


# -- single-event primitives -----------------------------------------------------


def ctmc_next_switch(chain: RegimeChain, i: int, rng: np.random.Generator):
    """Sojourn time in regime i and the regime entered next (inf, i if absorbing)."""
    q = chain.exit_rates()[i]
    if q <= 0:
        return math.inf, i
    tau = rng.exponential(1.0 / q)
    j = int(rng.choice(chain.n_regimes, p=chain.rates[i] / q))
    return tau, j


def ode_segment(problem: ControlProblem, i: int, x0: float, dt: float) -> float:
    """Population after ``dt`` days of undisturbed growth in regime ``i``."""
    return K.ode_closed(problem.rho[i], problem.kappa[i], float(x0), float(dt))


def ode_segment_rk4(problem: ControlProblem, i: int, x0: float, dt: float, substep=1e-3) -> float:
    return K.ode_rk4(problem.rho[i], problem.kappa[i], float(x0), float(dt), float(substep))


# -- paths and estimates --------------------------------------------------------------


EVENT_FIELDS = ("t", "kind", "regime", "X_before", "X_after", "z", "lambda_next")


@dataclass
class PathResult:
    disutility: float
    observation: float
    harvest: float
    events: np.ndarray = field(repr=False)

    @property
    def total(self) -> float:
        return self.disutility + self.observation + self.harvest


def simulate_path(problem: ControlProblem, policy, config: SimConfig, seed=None) -> PathResult:
    """One path with its event log; ``seed`` defaults to ``config.seed``."""
    args = _kernel_args(problem, policy, config)
    seed = config.seed if seed is None else seed
    cap = 4096
    while True:
        logs = [np.empty(cap), np.empty(cap, dtype=np.int64), np.empty(cap, dtype=np.int64),
                np.empty(cap), np.empty(cap), np.empty(cap), np.empty(cap)]
        dis, obs, harv, n_ev = K.run_path(int(seed) % 2**32, *args.values(), True, *logs)
        if n_ev <= cap:
            break
        cap = 2 * n_ev
    dtype = [(name, "i8" if name in ("kind", "regime") else "f8") for name in EVENT_FIELDS]
    events = np.empty(n_ev, dtype=dtype)
    for name, arr in zip(EVENT_FIELDS, logs):
        events[name] = arr[:n_ev]
    return PathResult(dis, obs, harv, events)


def write_event_log(path, events: np.ndarray):
    with open(path, "w", newline="") as fh:
        fh.write("# " + ", ".join(EVENT_FIELDS) + "\n")
        w = csv.writer(fh)
        for ev in events:
            kind = "switch" if ev["kind"] == K.EVENT_SWITCH else "obs"
            w.writerow([repr(float(ev["t"])), kind, int(ev["regime"]), repr(float(ev["X_before"])),
                        repr(float(ev["X_after"])), repr(float(ev["z"])), repr(float(ev["lambda_next"]))])


@dataclass
class Estimate:
    """Monte Carlo estimate of the discounted performance index.

    ``mean`` is the sum of the three component means; ``se`` is the
    standard error of the per-path totals.
    """

    mean: float
    se: float
    disutility: float
    observation: float
    harvest: float
    n_paths: int
    totals: np.ndarray = field(repr=False, default=None)

    def as_dict(self):
        return {k: getattr(self, k) for k in ("mean", "se", "disutility", "observation", "harvest", "n_paths")}


def estimate_performance(problem: ControlProblem, policy, config: SimConfig) -> Estimate:
    args = _kernel_args(problem, policy, config)
    dis, obs, harv = K.run_paths(int(config.seed), int(config.n_paths), *args.values())
    totals = dis + obs + harv
    n = config.n_paths
    se = float(totals.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    d_m, o_m, h_m = float(dis.mean()), float(obs.mean()), float(harv.mean())
    return Estimate(d_m + o_m + h_m, se, d_m, o_m, h_m, n, totals)


def sample_regime_path(chain: RegimeChain, i0: int, duration: float, step: float, seed: int) -> np.ndarray:
    """Regime index at every multiple of ``step`` in [0, duration)."""
    q, cum = _cumulative(chain)
    return K.sample_regimes(int(seed) % 2**32, int(i0), float(duration), float(step), q, cum)
