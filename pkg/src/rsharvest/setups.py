"""Named configurations shared by the experiment scripts and the test suite."""

import numpy as np

from .closed_form import ReducedParams
from .model import ControlProblem, ModelParams, RegimeChain, synthetic_river_chain
from .regimes import RegimeSpec
from .solver import Grid

# Full resolution: 41 regimes on Q_i = 0.5 + 1.25 i, field-study grid.
FULL_GRID = Grid()


def full_chain() -> RegimeChain:
    return synthetic_river_chain(41, q0=0.5, q_top=50.5)


def full_problem(**params) -> ControlProblem:
    return ControlProblem.build(full_chain(), ModelParams(**params))


# CI scale: the first 11 regimes of the same discharge rule. L is lowered so
# that regimes above the penalty threshold exist.
CI_GRID = Grid(N=101, dt=0.002)
CI_L = 4


def ci_chain() -> RegimeChain:
    return synthetic_river_chain(11, q0=0.5, q_top=13.0)


def ci_problem(**params) -> ControlProblem:
    params.setdefault("L", CI_L)
    return ControlProblem.build(ci_chain(), ModelParams(**params))


def grid_for(problem: ControlProblem, N=101, target=0.45, T=365.0 / 4.0, tol_ss=1e-9) -> Grid:
    """Grid whose explicit step puts the stability number at ``target``."""
    probe = Grid(N=N, dt=1.0, T=T, tol_ss=tol_ss)
    rate = probe.stability_number(problem)  # dt = 1
    return Grid(N=N, dt=target / rate, T=T, tol_ss=tol_ss)


# Reduced two-regime model with a feasible "harvest in regime 0 only" pattern.
REDUCED_EXAMPLE = ReducedParams(
    f0=0.05, f1=-0.3, w01=0.1, w10=0.5, delta=0.2, r=0.5, zbar=0.5, K=0.5, P=5.0
)

# Three-regime chain for the estimator round trip (rates in 1/day).
ESTIMATOR_RATES = np.array([
    [0.0, 0.8, 0.0],
    [0.0, 0.0, 1.0],
    [0.9, 0.0, 0.0],
])
ESTIMATOR_SPEC = RegimeSpec(I=2, q0=1.0, step=4.0)


def estimator_chain() -> RegimeChain:
    return RegimeChain(ESTIMATOR_SPEC.discharges, ESTIMATOR_RATES)
