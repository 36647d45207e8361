import numpy as np
import pytest

from conftest import identical_pop, scal_of
from glsgame import (
    PlayerPopulation,
    ProvisionCost,
    Scalarization,
    build_attribute_space,
    estimator,
    oracle,
    polynomial_design_space,
    solver,
)
from glsgame.errors import SingularInformation
from glsgame.solver import SolverOptions, project_simplex

ONE = np.ones((1, 1))


# ---------------------------------------------------------------------------
# equilibrium solves
# ---------------------------------------------------------------------------

def test_linear_single_player(point_space, trace):
    res = solver.minimize_potential(point_space, identical_pop(1.0, 1), trace)
    assert res.converged
    assert res.profile.lam[0, 0] == pytest.approx(1.0, abs=1e-7)
    assert res.potential_value == pytest.approx(2.0, rel=1e-10)
    assert res.estimation_cost == pytest.approx(1.0, rel=1e-8)


def test_monomial_equilibrium_matches_closed_form(point_space, trace):
    res = solver.minimize_potential(point_space, identical_pop(2.0, 4), trace)
    ell, cost = oracle.closed_form_1d(4, 2, 1)
    assert res.converged
    assert res.profile.lam[0, 0] == pytest.approx(ell, rel=1e-6)
    assert res.estimation_cost == pytest.approx(cost, rel=1e-8)


def test_two_axis_linear_equilibrium(axis_space, trace):
    # total measure 2/sqrt(a) split evenly; estimation cost 2 sqrt(a)
    a = 4.0
    pop = PlayerPopulation.identical(ProvisionCost.linear(a), 3)
    res = solver.minimize_potential(axis_space, pop, trace)
    assert res.converged
    total = 0.5 * 3 * res.profile.lam[0].sum()  # total design mass
    assert total == pytest.approx(2.0 / np.sqrt(a), rel=1e-6)
    assert res.estimation_cost == pytest.approx(2.0 * np.sqrt(a), rel=1e-8)
    assert res.profile.lam[0, 0] == pytest.approx(res.profile.lam[0, 1], rel=1e-5)


def test_solver_matches_grid_oracle_small_instances(trace):
    space2 = build_attribute_space([[1.0, 0.0], [0.0, 1.0]])
    cases = [
        (space2, identical_pop(1.0, 1)),
        (space2, identical_pop(2.0, 3)),
        (build_attribute_space([[1.0]]),
         PlayerPopulation(((ProvisionCost.monomial(2.0), 2), (ProvisionCost.linear(1.0), 1)))),
    ]
    for space, pop in cases:
        res = solver.minimize_potential(space, pop, trace)
        _, grid_value = oracle.grid_minimize_potential(
            space, pop, trace, oracle.GridSpec(0.0, 2.5, 1e-3))
        assert res.converged
        assert res.potential_value <= grid_value + 1e-9
        assert abs(res.potential_value - grid_value) < 1e-4


def test_potential_descent_is_monotone(point_space, trace):
    accepted = []

    class Recorder:
        def __init__(self, inner):
            self.inner = inner

        def value(self, lam):
            return self.inner.value(lam)

        def value_and_grad(self, lam, grad):
            value = self.inner.value_and_grad(lam, grad)
            accepted.append(value)
            return value

    from glsgame._backend import make_objective

    pop = identical_pop(2.0, 4)
    weights = estimator.potential_weights(point_space, pop)
    objective = Recorder(make_objective(point_space.points, weights, pop.costs, trace, 1.0))
    opts = SolverOptions()
    project = lambda v: np.clip(v, 0.0, opts.l_max, out=v)  # noqa: E731
    certificate = lambda x, g, f: solver.box_kkt_residual(x, g)  # noqa: E731
    solver._descent(objective, np.full((1, 1), 0.25), project, certificate, opts,
                    diag_steps=True)
    diffs = np.diff(accepted)
    assert np.all(diffs <= 1e-15)


def test_not_converged_flag(point_space, trace):
    res = solver.minimize_potential(point_space, identical_pop(2.0, 4), trace,
                                    SolverOptions(max_iters=2, tol=1e-14))
    assert not res.converged
    assert res.iterations >= 2


def test_random_initializations_agree_on_estimation_cost(trace):
    # linear costs: many equilibria, unique equilibrium estimation cost
    space = polynomial_design_space(3, range(-3, 4))
    pop = PlayerPopulation(((ProvisionCost.linear(1.0), 3), (ProvisionCost.linear(2.0), 2)))
    costs = []
    for seed in range(5):
        res = solver.minimize_potential(space, pop, trace,
                                        SolverOptions(init="random", seed=seed))
        assert res.converged
        costs.append(res.estimation_cost)
    assert (max(costs) - min(costs)) / min(costs) < 1e-6


def test_near_linear_off_support_cells_converge(poly4_space, trace):
    # off-support equilibrium precisions are positive but astronomically
    # small; the KKT certificate must still reach its tolerance
    pop = identical_pop(1.01, 10)
    res = solver.minimize_potential(poly4_space, pop, trace)
    assert res.converged
    assert res.kkt_residual <= 1e-8


# ---------------------------------------------------------------------------
# social cost
# ---------------------------------------------------------------------------

def test_social_cost_single_player_coincides_with_potential(point_space, trace):
    eq = solver.minimize_potential(point_space, identical_pop(2.0, 1), trace)
    opt = solver.minimize_social_cost(point_space, identical_pop(2.0, 1), trace)
    assert opt.potential_value == pytest.approx(eq.potential_value, rel=1e-9)


def test_social_optimum_monomial(point_space, trace):
    res = solver.minimize_social_cost(point_space, identical_pop(2.0, 4), trace)
    assert res.converged
    assert res.profile.lam[0, 0] == pytest.approx(0.5, rel=1e-6)
    assert res.potential_value == pytest.approx(3.0, rel=1e-9)


def test_social_optimum_linear_two_players(point_space, trace):
    res = solver.minimize_social_cost(point_space, identical_pop(1.0, 2), trace)
    total = 2 * res.profile.lam[0, 0]
    assert total == pytest.approx(np.sqrt(2.0), rel=1e-6)
    assert res.potential_value == pytest.approx(2.8284271247461903, rel=1e-9)


# ---------------------------------------------------------------------------
# KKT residual
# ---------------------------------------------------------------------------

def test_kkt_residual_at_closed_form_equilibrium(point_space, trace):
    ell, _ = oracle.closed_form_1d(4, 2, 1)
    pop = identical_pop(2.0, 4)
    assert solver.kkt_residual(point_space, pop, ell * ONE, trace) <= 1e-10


def test_kkt_residual_positive_away_from_equilibrium(point_space, trace):
    ell, _ = oracle.closed_form_1d(4, 2, 1)
    pop = identical_pop(2.0, 4)
    assert solver.kkt_residual(point_space, pop, 2 * ell * ONE, trace) > 1e-3


def test_kkt_residual_zero_gradient_interior(point_space, trace):
    # 1-player linear game: gradient vanishes exactly at l = 1
    pop = identical_pop(1.0, 1)
    assert solver.kkt_residual(point_space, pop, ONE, trace) <= 1e-12


def test_kkt_residual_singular_profile_raises(point_space, trace):
    with pytest.raises(SingularInformation):
        solver.kkt_residual(point_space, identical_pop(1.0, 1), 0.0 * ONE, trace)


# ---------------------------------------------------------------------------
# optimal design
# ---------------------------------------------------------------------------

def test_design_two_axes(axis_space, trace):
    res = solver.solve_optimal_design(axis_space, trace)
    assert res.converged
    assert np.allclose(res.measure.nu, [0.5, 0.5], atol=1e-9)
    assert res.criterion == pytest.approx(4.0, rel=1e-10)


def test_design_single_point(point_space, trace):
    res = solver.solve_optimal_design(point_space, trace)
    assert np.allclose(res.measure.nu, [1.0])
    assert res.criterion == pytest.approx(1.0)


def test_design_poly4_zero_weight_at_center(poly4_space, trace):
    res = solver.solve_optimal_design(poly4_space, trace)
    assert res.converged
    assert res.measure.nu[10] < 1e-8  # the [1, 0, 0, 0] point
    nu_fw, crit_fw, gap_fw = oracle.frank_wolfe_design(poly4_space, trace, tol=1e-7)
    assert gap_fw <= 1e-7 * (1 + abs(crit_fw))
    assert res.criterion == pytest.approx(crit_fw, rel=1e-8)


def test_design_poly3_max_weight_at_center(trace):
    space = polynomial_design_space(3, range(-10, 11))
    res = solver.solve_optimal_design(space, trace)
    assert int(np.argmax(res.measure.nu)) == 10


def test_design_matches_simplex_grid_search(trace):
    space = build_attribute_space([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    res = solver.solve_optimal_design(space, trace)
    _, grid_value = oracle.grid_minimize_design(space, trace, pitch=1e-3)
    assert res.converged
    assert res.criterion <= grid_value + 1e-9
    assert abs(res.criterion - grid_value) < 1e-3


def test_design_invariant_under_point_permutation(poly4_space, trace):
    base = solver.solve_optimal_design(poly4_space, trace)
    rng = np.random.default_rng(23)
    perm = rng.permutation(poly4_space.m)
    shuffled = build_attribute_space(poly4_space.points[perm], poly4_space.mu[perm])
    res = solver.solve_optimal_design(shuffled, trace)
    assert res.criterion == pytest.approx(base.criterion, abs=1e-8)
    assert np.allclose(np.sort(res.measure.nu), np.sort(base.measure.nu), atol=1e-6)


def test_michelot_projection_properties():
    rng = np.random.default_rng(2)
    for _ in range(200):
        v = rng.normal(scale=3.0, size=int(rng.integers(1, 8)))
        proj = project_simplex(v)
        assert proj.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(proj >= 0.0)
        # projection optimality: no feasible direction improves the distance
        reference = rng.dirichlet(np.ones(v.size))
        assert np.sum((proj - v) ** 2) <= np.sum((reference - v) ** 2) + 1e-12


def test_design_frobenius_criterion(poly4_space):
    # the duality gap itself bounds the suboptimality, so a converged result
    # is self-certifying
    scal = Scalarization.squared_frobenius()
    res = solver.solve_optimal_design(poly4_space, scal)
    assert res.converged
    assert res.duality_gap <= 1e-8 * (1 + res.criterion)
    assert res.measure.nu[10] < 1e-8
