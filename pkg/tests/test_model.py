import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsharvest.model import (
    ControlProblem,
    ModelError,
    ModelParams,
    RegimeChain,
    capacities,
    disutility,
    growth_rate,
    harvest_cost,
    interior_equilibrium,
    field_discharges,
    synthetic_river_chain,
)


def test_field_discharge_rule():
    q = field_discharges()
    assert q.size == 41
    assert q[0] == 0.5 and q[16] == 20.5 and q[-1] == 50.5


def test_chain_rejects_bad_input():
    with pytest.raises(ModelError):
        RegimeChain([1.0, 2.0], [[0.0, -1.0], [1.0, 0.0]])
    with pytest.raises(ModelError):
        RegimeChain([2.0, 1.0], [[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ModelError):
        RegimeChain([1.0, 2.0], [[0.0, 1.0]])


def test_chain_ignores_diagonal():
    ch = RegimeChain([1.0, 2.0], [[5.0, 1.0], [2.0, 7.0]])
    assert np.all(np.diag(ch.rates) == 0)
    np.testing.assert_allclose(ch.generator().sum(axis=1), 0.0)


def test_stationary_distribution_two_state():
    ch = RegimeChain([1.0, 2.0], [[0.0, 1.0], [3.0, 0.0]])
    np.testing.assert_allclose(ch.stationary_distribution(), [0.75, 0.25], atol=1e-12)


def test_capacity_normalized_to_top_regime():
    ch = synthetic_river_chain()
    c = capacities(ch, ModelParams())
    assert c[-1] == pytest.approx(1.0)
    assert np.all(np.diff(c) > 0) and c[0] > 0


def test_value_bound_at_defaults():
    pr = ControlProblem.build(synthetic_river_chain(), ModelParams())
    # h(1)/delta + d * lambda_hi / delta = 5 + 1/6
    assert pr.value_bound() == pytest.approx(5.0 + 1.0 / 6.0, abs=1e-12)


def test_params_validation():
    with pytest.raises(ModelError):
        ModelParams(lambda_lo=0.5, lambda_hi=0.1)
    with pytest.raises(ModelError):
        ModelParams(zbar=1.0)
    with pytest.raises(ModelError):
        ModelParams(L=1.5)


def test_state_outside_unit_interval():
    with pytest.raises(ModelError):
        disutility(ModelParams(), 1.1)
    assert disutility(ModelParams(), 1.0 + 1e-13) == 1.0


def test_harvest_cost_penalty_above_L():
    p = ModelParams()
    base = p.K0 + p.K1 * 0.8 * p.zbar
    assert harvest_cost(p, 16, 0.8, p.zbar) == pytest.approx(base)
    assert harvest_cost(p, 17, 0.8, p.zbar) == pytest.approx(p.P * base)
    assert harvest_cost(p, 17, 0.8, 0.0) == 0.0
    with pytest.raises(ModelError):
        harvest_cost(p, 0, 0.8, 0.3)


@settings(max_examples=50, deadline=None)
@given(
    mu=st.floats(0.1, 1.0),
    eta=st.floats(0.01, 0.2),
    i=st.integers(0, 40),
    x=st.floats(0.0, 1.0),
)
def test_flattened_drift_matches_pointwise(mu, eta, i, x):
    ch = synthetic_river_chain()
    params = ModelParams(mu=mu, eta=eta)
    pr = ControlProblem.build(ch, params)
    assert pr.drift(np.array([x]))[i, 0] == pytest.approx(growth_rate(ch, params, i, x), abs=1e-13)


@pytest.mark.parametrize("i", [0, 5, 10, 40])
def test_interior_equilibrium_is_a_root(i):
    ch = synthetic_river_chain()
    p = ModelParams()
    xe = interior_equilibrium(ch, p, i)
    if xe > 0:
        assert growth_rate(ch, p, i, xe) == pytest.approx(0.0, abs=1e-14)
    else:
        assert growth_rate(ch, p, i, 0.5) < 0


def test_synthetic_chain_concentrated_on_low_regimes():
    ch = synthetic_river_chain()
    pi = ch.stationary_distribution()
    assert pi[:17].sum() > 0.9
    assert np.all(ch.exit_rates() > 0)


def test_synthetic_chain_speeds_independent_of_spacing():
    coarse = synthetic_river_chain(11)
    fine = synthetic_river_chain(41)
    # recession speed in m^3/s per day at the same discharge
    dq_c = coarse.discharges[1] - coarse.discharges[0]
    dq_f = fine.discharges[1] - fine.discharges[0]
    assert coarse.rates[4, 3] * dq_c == pytest.approx(fine.rates[16, 15] * dq_f)
