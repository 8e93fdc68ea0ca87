import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsharvest.schemes import llxf_hamiltonian, weno3_biased_derivatives
from rsharvest.setups import ci_problem, CI_GRID
from rsharvest.solver import Grid, solve_flexible, solve_inflexible, step_flexible, step_inflexible


@settings(max_examples=100, deadline=None)
@given(slope=st.floats(-50, 50), shift=st.floats(-50, 50), n=st.integers(5, 300))
def test_exact_on_linear_data(slope, shift, n):
    x = np.linspace(0.0, 1.0, n)
    pm, pp = weno3_biased_derivatives(slope * x + shift, x[1] - x[0])
    tol = 1e-13 * max(1.0, abs(slope), abs(shift)) * n
    np.testing.assert_allclose(pm, slope, atol=tol, rtol=0)
    np.testing.assert_allclose(pp, slope, atol=tol, rtol=0)


def _interior_error(n):
    x = np.linspace(0.0, 1.0, n)
    pm, pp = weno3_biased_derivatives(np.sin(2 * np.pi * x), x[1] - x[0])
    exact = 2 * np.pi * np.cos(2 * np.pi * x)
    sl = slice(2, n - 2)
    return max(np.abs(pm[sl] - exact[sl]).max(), np.abs(pp[sl] - exact[sl]).max())


def test_convergence_order_on_smooth_data():
    errs = [_interior_error(n) for n in (101, 201, 401)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 2.0), orders


def test_boundary_nodes_first_order():
    x = np.linspace(0.0, 1.0, 11)
    u = x**2
    pm, pp = weno3_biased_derivatives(u, 0.1)
    assert pm[0] == pytest.approx(0.1)  # (u1 - u0) / dx
    assert pp[-1] == pytest.approx((1.0 - 0.81) / 0.1)
    # next-to-boundary uses the central candidate, exact for quadratics
    assert pm[1] == pytest.approx(0.2)
    assert pp[-2] == pytest.approx(1.8)


def test_too_few_nodes():
    with pytest.raises(ValueError):
        weno3_biased_derivatives(np.zeros(4), 0.25)


@settings(max_examples=100, deadline=None)
@given(f=st.floats(-10, 10), pm=st.floats(-10, 10), pp=st.floats(-10, 10))
def test_llxf_is_upwind_for_linear_hamiltonian(f, pm, pp):
    h = float(llxf_hamiltonian(f, pm, pp))
    expected = -f * (pp if f > 0 else pm)
    assert h == pytest.approx(expected, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(f=st.floats(-5, 5), a=st.floats(-5, 5), b=st.floats(-5, 5), c=st.floats(0, 5))
def test_llxf_monotone(f, a, b, c):
    # nonincreasing in p- ... for the -f p Hamiltonian: dH/dp- = (|f| - f)/2 >= 0, dH/dp+ <= 0
    base = llxf_hamiltonian(f, a, b)
    assert llxf_hamiltonian(f, a + c, b) >= base - 1e-12
    assert llxf_hamiltonian(f, a, b + c) <= base + 1e-12


@pytest.mark.parametrize("kind", ["flexible", "inflexible"])
def test_kernel_step_matches_numpy_reference(kind):
    pr = ci_problem()
    rng = np.random.default_rng(3)
    slots = 2 if kind == "flexible" else 4
    psi0 = np.sort(rng.uniform(0, 3, (slots, pr.n_regimes, CI_GRID.N)), axis=-1)
    psi0 += rng.normal(0, 0.05, psi0.shape)  # rough data exercises the WENO weights
    phi0 = psi0.min(axis=0)
    solve = solve_flexible if kind == "flexible" else solve_inflexible
    step = step_flexible if kind == "flexible" else step_inflexible
    for n_steps in (1, 2):
        sol = solve(pr, CI_GRID, psi0=psi0, max_steps=n_steps)
        psi, phi = psi0, phi0
        for _ in range(n_steps):
            psi, phi = step(psi, phi, pr, CI_GRID)
        np.testing.assert_allclose(sol.psi, psi, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(sol.phi, phi, rtol=1e-12, atol=1e-12)
