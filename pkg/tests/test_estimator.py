import math

import numpy as np
import pytest

from conftest import identical_pop, random_instance, scal_of
from glsgame import (
    PlayerPopulation,
    ProvisionCost,
    Scalarization,
    build_attribute_space,
    build_joint_distribution,
    estimator,
    oracle,
)
from glsgame.errors import (
    CountMismatch,
    ExactTooLarge,
    SingularDrawMass,
    SingularInformation,
    TooManyDegenerateDraws,
    ZeroPrecision,
)

ONE = np.ones((1, 1))


# ---------------------------------------------------------------------------
# information matrix
# ---------------------------------------------------------------------------

def test_info_matrix_identity(axis_space, trace):
    pop = identical_pop(2.0, 2)
    info = estimator.info_matrix(axis_space, pop, np.ones((1, 2)))
    assert np.allclose(info.matrix, np.eye(2))
    assert info.invertible


def test_info_matrix_scalar(point_space):
    info = estimator.info_matrix(point_space, identical_pop(1.0, 1), 4.0 * ONE)
    assert np.allclose(info.matrix, [[4.0]])


def test_info_matrix_rank_deficiency_flagged(axis_space):
    info = estimator.info_matrix(axis_space, identical_pop(1.0, 1), np.array([[2.0, 0.0]]))
    assert np.allclose(info.matrix, np.diag([1.0, 0.0]))
    assert not info.invertible


# ---------------------------------------------------------------------------
# GLS cost and gradient
# ---------------------------------------------------------------------------

def test_gls_cost_scalar_inverse(point_space, trace):
    pop = identical_pop(1.0, 4)
    assert estimator.gls_cost(point_space, pop, ONE, trace) == pytest.approx(0.25)


def test_gls_cost_two_axes(axis_space, trace):
    # total per-point precision 1 each -> M = diag(1/2, 1/2), trace of inverse 4... per
    # point measure nu(x) = mu(x) * total = 0.5 -> criterion 2 per axis
    pop = identical_pop(1.0, 1)
    cost = estimator.gls_cost(axis_space, pop, np.array([[2.0, 2.0]]), trace)
    assert cost == pytest.approx(2.0)


def test_gls_cost_at_symmetric_equilibrium(point_space, trace):
    # frozen from oracle.closed_form_1d(4, 2, 1)
    ell = 0.31498026247371835
    pop = identical_pop(2.0, 4)
    cost = estimator.gls_cost(point_space, pop, ell * ONE, trace)
    assert cost == pytest.approx(0.7937005259840998, rel=1e-12)


def test_gls_cost_singular_sentinel(point_space, trace):
    assert estimator.gls_cost(point_space, identical_pop(1.0, 1), 0.0 * ONE, trace) == math.inf


def test_gls_gradient_scalar(point_space, trace):
    grad = estimator.gls_cost_gradient(point_space, identical_pop(1.0, 1), 2.0 * ONE, trace)
    assert grad[0, 0] == pytest.approx(-0.25)


def test_gls_gradient_two_axes_hand_value(axis_space, trace):
    # M = diag(1/2, 1/2); dC/dlam(x) = -mu(x) x^T M^-2 x = -0.5 * 4
    grad = estimator.gls_cost_gradient(axis_space, identical_pop(1.0, 1), np.ones((1, 2)), trace)
    assert np.allclose(grad, -2.0)


def test_gls_gradient_singular_raises(point_space, trace):
    with pytest.raises(SingularInformation):
        estimator.gls_cost_gradient(point_space, identical_pop(1.0, 1), 0.0 * ONE, trace)


def test_gls_gradient_matches_finite_differences():
    rng = np.random.default_rng(31)
    for _ in range(12):
        space, pop, profile = random_instance(rng)
        scal = (Scalarization.trace(), Scalarization.pow_trace(2.0),
                Scalarization.squared_frobenius())[int(rng.integers(0, 3))]
        analytic = estimator.gls_cost_gradient(space, pop, profile, scal)
        numeric = oracle.fd_gradient(
            lambda lam: estimator.gls_cost(space, pop, lam, scal), profile)
        assert np.allclose(analytic, numeric, rtol=1e-6, atol=1e-8)


def test_gls_gradient_entries_nonpositive():
    rng = np.random.default_rng(7)
    for _ in range(10):
        space, pop, profile = random_instance(rng)
        grad = estimator.gls_cost_gradient(space, pop, profile, Scalarization.trace())
        assert np.all(grad <= 0.0)


def test_gls_cost_scaling_homogeneity():
    rng = np.random.default_rng(13)
    for _ in range(10):
        space, pop, profile = random_instance(rng)
        for q, scal in ((1.0, Scalarization.trace()), (2.0, Scalarization.squared_frobenius())):
            base = estimator.gls_cost(space, pop, profile, scal)
            for a in (0.5, 2.0):
                scaled = estimator.gls_cost(space, pop, a * profile, scal)
                assert scaled == pytest.approx(a**-q * base, rel=1e-9)


def test_gls_cost_monotone_in_each_precision():
    rng = np.random.default_rng(17)
    space, pop, profile = random_instance(rng)
    scal = Scalarization.trace()
    base = estimator.gls_cost(space, pop, profile, scal)
    for t in range(profile.shape[0]):
        for x in range(profile.shape[1]):
            bumped = profile.copy()
            bumped[t, x] += 0.5
            assert estimator.gls_cost(space, pop, bumped, scal) <= base + 1e-12


# ---------------------------------------------------------------------------
# potential and social cost
# ---------------------------------------------------------------------------

def test_potential_linear_unit(point_space, trace):
    pop = identical_pop(1.0, 1)
    assert estimator.potential(point_space, pop, ONE, trace) == pytest.approx(2.0)


def test_potential_linear_at_stationary_point(point_space, trace):
    # cost 4*l + 1/l is stationary at l = 1/2 with value 4
    pop = PlayerPopulation.identical(ProvisionCost.linear(4.0), 1)
    assert estimator.potential(point_space, pop, 0.5 * ONE, trace) == pytest.approx(4.0)


def test_potential_all_zero_is_infinite(axis_space, trace):
    pop = identical_pop(2.0, 3)
    assert estimator.potential(axis_space, pop, np.zeros((1, 2)), trace) == math.inf


def test_social_cost_equals_potential_for_single_player(trace):
    rng = np.random.default_rng(3)
    space, pop, profile = random_instance(rng)
    single = PlayerPopulation.identical(pop.costs[0], 1)
    profile = profile[:1]
    assert estimator.social_cost(space, single, profile, trace) == pytest.approx(
        estimator.potential(space, single, profile, trace))


def test_social_cost_two_linear_players(point_space, trace):
    pop = identical_pop(1.0, 2)
    assert estimator.social_cost(point_space, pop, ONE, trace) == pytest.approx(3.0)


def test_social_cost_monomial_minimum_location(point_space, trace):
    # 4 l^2 + 1/l over symmetric profiles is minimized at l = 0.5 with value 3
    pop = identical_pop(2.0, 4)
    at_opt = estimator.social_cost(point_space, pop, 0.5 * ONE, trace)
    assert at_opt == pytest.approx(3.0)
    for ell in (0.4, 0.45, 0.55, 0.6):
        assert estimator.social_cost(point_space, pop, ell * ONE, trace) > at_opt


def test_potential_gradient_matches_finite_differences():
    rng = np.random.default_rng(41)
    for _ in range(8):
        space, pop, profile = random_instance(rng)
        scal = scal_of(float(rng.integers(1, 3)))
        analytic = estimator.potential_gradient(space, pop, profile, scal)
        numeric = oracle.fd_gradient(
            lambda lam: estimator.potential(space, pop, lam, scal), profile)
        assert np.allclose(analytic, numeric, rtol=1e-6, atol=1e-8)


# ---------------------------------------------------------------------------
# OLS
# ---------------------------------------------------------------------------

def test_ols_equals_homoscedastic_gls_on_point_space(point_space, trace):
    pop = identical_pop(2.0, 4)
    ols = estimator.ols_cost(point_space, pop, ONE, trace)
    assert ols == pytest.approx(0.25)  # n^-2 sum 1/lam = 1/n
    assert ols == pytest.approx(estimator.gls_cost(point_space, pop, ONE, trace))


def test_ols_requires_positive_precisions(point_space, trace):
    with pytest.raises(ZeroPrecision):
        estimator.ols_cost(point_space, identical_pop(1.0, 2), 0.0 * ONE, trace)


def test_ols_exact_enumeration_cutoff(axis_space, trace):
    pop = identical_pop(2.0, 30)  # 2^30 assignments
    with pytest.raises(ExactTooLarge):
        estimator.ols_cost(axis_space, pop, np.ones((1, 2)), trace)


def test_ols_singular_mass_detected(axis_space, trace):
    # a single agent never spans R^2, so every assignment is singular
    pop = identical_pop(2.0, 1)
    with pytest.raises(SingularDrawMass):
        estimator.ols_cost(axis_space, pop, np.ones((1, 2)), trace)


def test_ols_exact_matches_monte_carlo(trace):
    # one-dimensional two-point space: every assignment spans R^1
    space = build_attribute_space([[1.0], [2.0]], [0.4, 0.6])
    pop = identical_pop(2.0, 4)
    profile = np.array([[0.5, 2.0]])
    exact = estimator.ols_cost(space, pop, profile, trace)
    mean, stderr = estimator.ols_mean_cov_monte_carlo(space, pop, profile, 40000, 9)
    assert trace.value(mean) == pytest.approx(exact, abs=4 * float(np.trace(stderr)))


def test_ols_dominates_gls():
    # best linear unbiased estimation makes the GLS covariance a lower bound
    rng = np.random.default_rng(19)
    trace = Scalarization.trace()
    for _ in range(6):
        d = int(rng.integers(1, 3))
        m = d + 1
        while True:
            pts = rng.uniform(-2, 2, size=(m, d))
            if np.linalg.matrix_rank(pts) == d:
                break
        mu = rng.uniform(0.3, 1.0, size=m)
        space = build_attribute_space(pts, mu / mu.sum())
        pop = identical_pop(2.0, int(rng.integers(d + 1, d + 4)))
        profile = rng.uniform(0.3, 2.0, size=(1, m))
        try:
            ols = estimator.ols_cost(space, pop, profile, trace)
        except SingularDrawMass:
            continue
        gls = estimator.gls_cost(space, pop, profile, trace)
        assert ols >= gls - 1e-9


def test_ols_counterexample_closed_form(point_space, trace):
    # n regular cubic-cost players plus one prohibitively expensive player
    from glsgame import analysis

    pop, profile = analysis.solve_ols_counterexample(9, 3.0)
    got = estimator.ols_cost(point_space, pop, profile, trace)
    assert got == pytest.approx(1.3745612305259036, rel=1e-6)
    assert got >= 1.0


# ---------------------------------------------------------------------------
# joint distributions and complete information
# ---------------------------------------------------------------------------

def test_joint_deterministic_assignment_matches_counts(axis_space):
    joint = build_joint_distribution(axis_space, [[0, 1, 1]], [1.0])
    lam = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    info = estimator.joint_info_matrix(axis_space, joint, lam)
    # agent 0 holds e1 with precision 1; agents 1, 2 hold e2 with 4 and 6
    assert np.allclose(info.matrix, np.diag([1.0, 10.0]))


def test_joint_product_measure_reproduces_info_matrix(axis_space):
    pop = identical_pop(2.0, 2)
    lam_row = np.array([0.7, 1.3])
    assignments = [[i, j] for i in range(2) for j in range(2)]
    probs = [axis_space.mu[i] * axis_space.mu[j] for i, j in assignments]
    joint = build_joint_distribution(axis_space, assignments, probs)
    per_agent = np.tile(lam_row, (2, 1))
    expected = estimator.info_matrix(axis_space, pop, lam_row[None, :]).matrix
    got = estimator.joint_info_matrix(axis_space, joint, per_agent).matrix
    assert np.allclose(got, expected, atol=1e-15)


def test_joint_correlated_degenerate_support():
    space = build_attribute_space([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    joint = build_joint_distribution(space, [[0, 0], [2, 2]], [0.9, 0.1])
    info = estimator.joint_info_matrix(space, joint, np.ones((2, 3)))
    assert info.invertible  # the [1,1] point rescues the rank
    collapsed = build_joint_distribution(space, [[0, 0], [1, 1]], [0.5, 0.5])
    info2 = estimator.joint_info_matrix(space, collapsed,
                                        np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
    assert not info2.invertible


def test_complete_info_equals_potential_when_counts_proportional(axis_space, trace):
    pop = identical_pop(2.0, 4)
    counts = np.array([[2, 2]])  # exactly mu * n
    profile = np.array([[0.4, 0.9]])
    phi_ci = estimator.complete_info_potential(axis_space, pop, counts, profile, trace)
    phi = estimator.potential(axis_space, pop, profile, trace)
    assert phi_ci == pytest.approx(phi, rel=1e-12)


def test_complete_info_on_point_space_always_matches(point_space, trace):
    pop = identical_pop(3.0, 5)
    for ell in (0.2, 0.7, 1.9):
        phi_ci = estimator.complete_info_potential(point_space, pop, [[5]], ell * ONE, trace)
        phi = estimator.potential(point_space, pop, ell * ONE, trace)
        assert phi_ci == pytest.approx(phi, rel=1e-12)


def test_complete_info_wrong_support_is_infinite(axis_space, trace):
    pop = identical_pop(2.0, 3)
    # everyone realized on e2, but precision only on e1
    value = estimator.complete_info_potential(
        axis_space, pop, [[0, 3]], np.array([[1.0, 0.0]]), trace)
    assert value == math.inf


def test_complete_info_count_mismatch(axis_space, trace):
    pop = identical_pop(2.0, 3)
    with pytest.raises(CountMismatch):
        estimator.complete_info_potential(axis_space, pop, [[1, 1]], np.ones((1, 2)), trace)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def test_simulate_gls_variance_single_point(point_space):
    pop = identical_pop(1.0, 1)
    sim = estimator.simulate_gls(point_space, pop, 4.0 * ONE, [1.5], trials=100_000, seed=3)
    assert sim.theoretical_cov[0, 0] == pytest.approx(0.25)
    z = (sim.empirical_cov[0, 0] - 0.25) / sim.cov_stderr[0, 0]
    assert abs(z) < 3.0
    assert sim.degenerate_draws == 0


def test_simulate_gls_unbiased(axis_space):
    pop = identical_pop(2.0, 25)
    sim = estimator.simulate_gls(axis_space, pop, np.ones((1, 2)), [1.0, -0.5],
                                 trials=20_000, seed=5)
    z = (sim.mean_beta - sim.beta) / sim.beta_stderr
    assert np.all(np.abs(z) < 3.0)


def test_simulate_gls_zero_noise_limit(point_space):
    pop = identical_pop(1.0, 1)
    sim = estimator.simulate_gls(point_space, pop, 1e6 * ONE, [2.0], trials=5_000, seed=11)
    assert abs(sim.mean_beta[0] - 2.0) < 1e-4
    assert sim.empirical_cov[0, 0] < 1e-5


def test_simulate_gls_rejects_frequent_degeneracy(axis_space):
    # 3 players on two axes: all-same-axis draws are singular with prob 1/4
    pop = identical_pop(2.0, 3)
    with pytest.raises(TooManyDegenerateDraws):
        estimator.simulate_gls(axis_space, pop, np.ones((1, 2)), [0.0, 0.0],
                               trials=10_000, seed=2)


def test_simulate_accepts_model_parameters(point_space):
    params = estimator.ModelParameters(beta=np.array([2.0]))
    sim = estimator.simulate_gls(point_space, identical_pop(1.0, 1), 4.0 * ONE,
                                 params, trials=200, seed=1)
    assert abs(sim.mean_beta[0] - 2.0) < 0.2
