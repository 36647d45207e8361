import numpy as np
import pytest

from conftest import identical_pop
from glsgame import PlayerPopulation, ProvisionCost, build_attribute_space, oracle
from glsgame.errors import InfiniteValue, TooManyVariables
from glsgame.oracle import GridSpec


def test_closed_form_satisfies_stationarity():
    # n p l^(p-1) = q n^-q l^(-q-1) at the reported precision
    for n in (1, 4, 16, 64):
        for p in (1.0, 1.5, 2.0, 3.0):
            for q in (1.0, 2.0, 3.0):
                ell, _ = oracle.closed_form_1d(n, p, q)
                lhs = n * p * ell ** (p - 1)
                rhs = q * n**-q * ell ** (-q - 1)
                assert lhs == pytest.approx(rhs, rel=1e-12)


def test_closed_form_base_case():
    assert oracle.closed_form_1d(1, 1, 1) == (1.0, 1.0)


def test_closed_form_linear_cost_is_n_independent():
    costs = {oracle.closed_form_1d(n, 1.0, 2.0)[1] for n in (1, 5, 50)}
    assert max(costs) - min(costs) < 1e-15


def test_grid_minimizer_single_variable(point_space, trace):
    profile, value = oracle.grid_minimize_potential(
        point_space, identical_pop(1.0, 1), trace, GridSpec(0.0, 3.0, 1e-3))
    assert profile.lam[0, 0] == pytest.approx(1.0, abs=2e-3)
    assert value == pytest.approx(2.0, abs=1e-4)


def test_grid_minimizer_matches_closed_form(point_space, trace):
    _, value = oracle.grid_minimize_potential(
        point_space, identical_pop(2.0, 4), trace, GridSpec(0.0, 1.5, 1e-3))
    _, cost = oracle.closed_form_1d(4, 2, 1)
    ell, _ = oracle.closed_form_1d(4, 2, 1)
    exact = 4 * ell**2 + cost
    assert value == pytest.approx(exact, abs=1e-4)


def test_grid_minimizer_symmetric_two_axes(axis_space, trace):
    profile, _ = oracle.grid_minimize_potential(
        axis_space, identical_pop(1.0, 1), trace, GridSpec(0.0, 4.0, 1e-3))
    assert profile.lam[0, 0] == pytest.approx(profile.lam[0, 1], abs=5e-3)


def test_grid_minimizer_variable_limit(axis_space, trace):
    pop = PlayerPopulation(
        ((ProvisionCost.linear(1.0), 1), (ProvisionCost.monomial(2.0), 1)))
    with pytest.raises(TooManyVariables):
        oracle.grid_minimize_potential(axis_space, pop, trace, GridSpec(0.0, 1.0, 0.01))


def test_fd_gradient_of_linear_sum():
    grad = oracle.fd_gradient(lambda lam: float(lam.sum()), np.ones((2, 3)))
    assert np.allclose(grad, 1.0, atol=1e-9)


def test_fd_gradient_infinite_value():
    def fn(lam):
        return np.inf if lam[0, 0] < 0.5 else float(lam.sum())

    with pytest.raises(InfiniteValue):
        oracle.fd_gradient(fn, np.full((1, 1), 0.5))


def test_simplex_grid_search_two_points(axis_space, trace):
    nu, value = oracle.grid_minimize_design(axis_space, trace, pitch=1e-3)
    assert np.allclose(nu, [0.5, 0.5], atol=2e-3)
    assert value == pytest.approx(4.0, abs=1e-4)


def test_frank_wolfe_two_axes(axis_space, trace):
    nu, crit, gap = oracle.frank_wolfe_design(axis_space, trace, tol=1e-10)
    assert np.allclose(nu, [0.5, 0.5], atol=1e-6)
    assert crit == pytest.approx(4.0, rel=1e-9)
