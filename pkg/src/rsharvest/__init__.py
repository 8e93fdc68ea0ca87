"""Optimal observation and harvesting under regime switching and random observation."""

__version__ = "0.1.0"

from .model import (
    ControlProblem,
    ModelError,
    ModelParams,
    RegimeChain,
    field_discharges,
    synthetic_river_chain,
)
from .solver import (
    DivergenceError,
    Grid,
    Solution,
    StabilityError,
    check_invariants,
    extract_policy,
    solve_flexible,
    solve_inflexible,
    voi,
)
from .closed_form import ReducedParams, closed_form_coefficients
from .simulator import SimConfig, estimate_performance, simulate_path
from .regimes import DischargeSeries, RegimeSpec, entropy, estimate_chain, synthesize_series

__all__ = [
    "ControlProblem", "ModelError", "ModelParams", "RegimeChain", "field_discharges",
    "synthetic_river_chain", "DivergenceError", "Grid", "Solution", "StabilityError",
    "check_invariants", "extract_policy", "solve_flexible", "solve_inflexible", "voi",
    "ReducedParams", "closed_form_coefficients", "SimConfig", "estimate_performance",
    "simulate_path", "DischargeSeries", "RegimeSpec", "entropy", "estimate_chain",
    "synthesize_series",
]
