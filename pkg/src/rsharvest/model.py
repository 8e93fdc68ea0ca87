"""Pointwise model functions and the parameter records shared by every module.

The population lives on [0, 1] and is driven, regime by regime, by the
logistic-with-detachment drift

    f(i, x) = mu * x * (1 - x / c_i) - eta * Q_i * x,
    c_i     = (a * Q_i + b) / (a * Q_I + b).

Solvers and the simulator do not call these functions directly. They use a
:class:`ControlProblem`, which flattens a chain and a parameter set into
per-regime coefficients ``f(i, x) = rho_i * x - kappa_i * x**2`` and a
disutility ``h(x) = scale * x**power + offset``. That form also covers the
reduced linear model and the degenerate analytic test cases.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

# Inputs this close outside [0, 1] are floating-point drift and get clamped.
CLAMP_SLACK = 1e-12


class ModelError(ValueError):
    """Invalid model input (parameters, chain or state)."""


def _clamp_unit(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < -CLAMP_SLACK) or np.any(arr > 1.0 + CLAMP_SLACK):
        raise ModelError(f"{name} outside [0, 1]: {x!r}")
    out = np.clip(arr, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RegimeChain:
    """Flow regimes with representative discharges and switching rates.

    ``rates[i, j]`` is the switching rate from regime i to regime j (1/day);
    the diagonal is ignored.
    """

    discharges: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        q = np.array(self.discharges, dtype=float).reshape(-1)
        w = np.array(self.rates, dtype=float)
        if q.size == 0:
            raise ModelError("a chain needs at least one regime")
        if w.shape != (q.size, q.size):
            raise ModelError(f"rate matrix shape {w.shape} does not match {q.size} regimes")
        if np.any(np.diff(q) <= 0):
            raise ModelError("discharges must be strictly increasing")
        if not np.all(np.isfinite(w)):
            raise ModelError("rates must be finite")
        np.fill_diagonal(w, 0.0)
        if np.any(w < 0):
            raise ModelError("off-diagonal switching rates must be nonnegative")
        q.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "discharges", q)
        object.__setattr__(self, "rates", w)

    @property
    def n_regimes(self) -> int:
        return self.discharges.size

    @property
    def top(self) -> int:
        """Index I of the largest regime."""
        return self.discharges.size - 1

    def exit_rates(self) -> np.ndarray:
        return self.rates.sum(axis=1)

    def generator(self) -> np.ndarray:
        g = self.rates.copy()
        np.fill_diagonal(g, -self.exit_rates())
        return g

    def stationary_distribution(self) -> np.ndarray:
        g = self.generator()
        n = g.shape[0]
        a = np.vstack([g.T, np.ones(n)])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()

    def _check_index(self, i):
        if not 0 <= int(i) <= self.top:
            raise ModelError(f"regime index {i} out of range 0..{self.top}")
        return int(i)


def field_discharges(n_regimes=41, q0=0.5, step=1.25):
    """Representative discharges ``Q_i = q0 + step * i``."""
    return q0 + step * np.arange(n_regimes)


def synthetic_river_chain(
    n_regimes=41,
    q0=0.5,
    q_top=50.5,
    flood_rate=0.05,
    rise_speed=0.25,
    recession=(0.5, 0.25),
):
    """A hydrograph-like chain concentrated on low regimes.

    Discharge recedes one regime at a time at speed ``recession[0] +
    recession[1] * Q`` (m^3/s per day), rises slowly at ``rise_speed`` and
    jumps up to a uniformly chosen higher regime (two or more steps up) at
    ``flood_rate`` per day. Speeds are converted to rates through the regime
    spacing, so coarse and fine discretizations of the same river agree.
    """
    if n_regimes < 2:
        raise ModelError("synthetic river chain needs at least two regimes")
    q = np.linspace(q0, q_top, n_regimes)
    dq = q[1] - q[0]
    n = n_regimes
    w = np.zeros((n, n))
    for i in range(n):
        if i > 0:
            w[i, i - 1] = (recession[0] + recession[1] * q[i]) / dq
        if i < n - 1:
            w[i, i + 1] = rise_speed / dq
        targets = np.arange(i + 2, n)
        if targets.size:
            w[i, targets] += flood_rate / targets.size
    return RegimeChain(q, w)


@dataclass(frozen=True)
class ModelParams:
    """Growth, cost and observation parameters (defaults: field-calibrated values)."""

    mu: float = 0.5
    a: float = 0.2 / 50.5
    b: float = 0.8
    eta: float = 0.07
    delta: float = 0.2
    d: float = 0.1
    K0: float = 0.15
    K1: float = 0.25
    P: float = 50.0
    L: int = 16
    zbar: float = 0.5
    lambda_hi: float = 1.0 / 3.0
    lambda_lo: float = 0.1
    m: float = 2.0

    def __post_init__(self):
        checks = [
            (self.delta > 0, "delta > 0"),
            (self.d > 0, "d > 0"),
            (self.K0 >= 0, "K0 >= 0"),
            (self.K1 > 0, "K1 > 0"),
            (self.P > 1, "P > 1"),
            (0 < self.zbar < 1, "0 < zbar < 1"),
            (0 < self.lambda_lo < self.lambda_hi, "0 < lambda_lo < lambda_hi"),
            (self.mu > 0, "mu > 0"),
            (self.eta > 0, "eta > 0"),
            (self.a >= 0, "a >= 0"),
            (self.b > 0, "b > 0"),
            (self.m > 0, "m > 0"),
            (int(self.L) == self.L and self.L >= 0, "L a nonnegative integer"),
        ]
        for ok, what in checks:
            if not ok:
                raise ModelError(f"parameter constraint violated: {what}")
        object.__setattr__(self, "L", int(self.L))

    def check_chain(self, chain: RegimeChain):
        c = capacities(chain, self)
        if np.any(c <= 0) or np.any(c > 1 + 1e-12):
            raise ModelError("capacity c_i must lie in (0, 1] for every regime")
        return self


def capacities(chain: RegimeChain, params: ModelParams) -> np.ndarray:
    q = chain.discharges
    return (params.a * q + params.b) / (params.a * q[-1] + params.b)


def capacity(chain: RegimeChain, params: ModelParams, i: int) -> float:
    i = chain._check_index(i)
    return float(capacities(chain, params)[i])


def growth_rate(chain: RegimeChain, params: ModelParams, i: int, x):
    """Net growth rate f(i, x) in 1/day (vectorized in x)."""
    i = chain._check_index(i)
    x = _clamp_unit(x)
    c = capacity(chain, params, i)
    return params.mu * x * (1.0 - x / c) - params.eta * chain.discharges[i] * x


def interior_equilibrium(chain: RegimeChain, params: ModelParams, i: int) -> float:
    """Positive root of f(i, .), or 0 when detachment beats growth."""
    i = chain._check_index(i)
    c = capacity(chain, params, i)
    return max(0.0, c * (1.0 - params.eta * chain.discharges[i] / params.mu))


def disutility(params: ModelParams, x):
    return np.power(_clamp_unit(x), params.m)


def harvest_cost(params: ModelParams, i: int, x, z):
    """Cost of the harvest decision z in {0, zbar} at regime i and population x."""
    x = _clamp_unit(x)
    if z == 0:
        return 0.0 * x
    if z != params.zbar:
        raise ModelError(f"harvest fraction must be 0 or zbar={params.zbar}, got {z}")
    base = params.K0 + params.K1 * x * params.zbar
    return base * params.P if int(i) > params.L else base


@dataclass(frozen=True)
class ControlProblem:
    """Flattened coefficients consumed by the solvers and the simulator.

    Drift is ``rho[i] * x - kappa[i] * x**2``; disutility is
    ``h_scale * x**h_power + h_offset``; harvesting costs
    ``K0 + K1 * x * zbar`` (times ``P`` above regime ``L``).
    ``lambdas`` is ``(lambda_lo, lambda_hi)``; equal entries are allowed.
    """

    chain: RegimeChain
    rho: np.ndarray
    kappa: np.ndarray
    delta: float
    d: float
    K0: float
    K1: float
    P: float
    L: int
    zbar: float
    lambdas: tuple = (0.1, 1.0 / 3.0)
    h_scale: float = 1.0
    h_power: float = 2.0
    h_offset: float = 0.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        n = self.chain.n_regimes
        rho = np.broadcast_to(np.asarray(self.rho, dtype=float), (n,)).copy()
        kappa = np.broadcast_to(np.asarray(self.kappa, dtype=float), (n,)).copy()
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "kappa", kappa)
        lo, hi = (float(v) for v in self.lambdas)
        if not (0 < lo <= hi):
            raise ModelError("need 0 < lambda_lo <= lambda_hi")
        object.__setattr__(self, "lambdas", (lo, hi))
        if not (0 < self.zbar < 1):
            raise ModelError("need 0 < zbar < 1")
        if self.delta <= 0 or self.d < 0 or self.K0 < 0 or self.K1 < 0:
            raise ModelError("need delta > 0 and nonnegative d, K0, K1")

    @classmethod
    def build(cls, chain: RegimeChain, params: ModelParams, label=""):
        params.check_chain(chain)
        c = capacities(chain, params)
        return cls(
            chain=chain,
            rho=params.mu - params.eta * chain.discharges,
            kappa=params.mu / c,
            delta=params.delta,
            d=params.d,
            K0=params.K0,
            K1=params.K1,
            P=params.P,
            L=params.L,
            zbar=params.zbar,
            lambdas=(params.lambda_lo, params.lambda_hi),
            h_power=params.m,
            label=label,
        )

    def replace(self, **changes) -> "ControlProblem":
        return dataclasses.replace(self, **changes)

    @property
    def n_regimes(self):
        return self.chain.n_regimes

    def drift(self, x) -> np.ndarray:
        """f(i, x) for every regime: shape (n_regimes, len(x))."""
        x = np.asarray(x, dtype=float)
        return self.rho[:, None] * x[None, :] - self.kappa[:, None] * x[None, :] ** 2

    def disutility(self, x):
        x = np.asarray(x, dtype=float)
        return self.h_scale * np.power(x, self.h_power) + self.h_offset

    def harvest_cost(self, x) -> np.ndarray:
        """Cost of harvesting zbar at every (regime, x): shape (n_regimes, len(x))."""
        x = np.asarray(x, dtype=float)
        base = self.K0 + self.K1 * x * self.zbar
        penalty = np.where(np.arange(self.n_regimes) > self.L, self.P, 1.0)
        return penalty[:, None] * base[None, :]

    def value_bound(self) -> float:
        """Upper bound h(1)/delta + d*lambda_hi/delta on the value function."""
        h1 = float(self.disutility(np.array([1.0]))[0])
        return h1 / self.delta + self.d * self.lambdas[1] / self.delta
