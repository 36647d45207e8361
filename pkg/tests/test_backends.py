import numpy as np
import pytest

from conftest import random_instance, scal_of
from glsgame import ProvisionCost, Scalarization, estimator
from glsgame._backend import compiled_available, make_objective

needs_compiled = pytest.mark.skipif(not compiled_available(),
                                    reason="compiled kernel not built")


@needs_compiled
def test_backends_agree_on_value_and_gradient():
    rng = np.random.default_rng(101)
    for _ in range(20):
        space, pop, profile = random_instance(rng)
        scal = (Scalarization.trace(), Scalarization.pow_trace(2.0),
                Scalarization.squared_frobenius(),
                Scalarization.average_mse(space))[int(rng.integers(0, 4))]
        kappa = float(rng.choice([1.0, pop.n]))
        weights = estimator.potential_weights(space, pop)
        fast = make_objective(space.points, weights, pop.costs, scal, kappa, force="cython")
        pure = make_objective(space.points, weights, pop.costs, scal, kappa, force="python")
        g_fast = np.empty_like(profile)
        g_pure = np.empty_like(profile)
        v_fast = fast.value_and_grad(profile, g_fast)
        v_pure = pure.value_and_grad(profile, g_pure)
        assert v_fast == pytest.approx(v_pure, rel=1e-12)
        assert np.allclose(g_fast, g_pure, rtol=1e-10, atol=1e-13)
        assert fast.value(profile) == pytest.approx(pure.value(profile), rel=1e-12)


@needs_compiled
def test_backends_agree_on_singular_sentinel(axis_space, trace):
    weights = np.ones((1, 2))
    costs = [ProvisionCost.monomial(2.0)]
    lam = np.array([[1.0, 0.0]])  # rank-1 information matrix
    for force in ("cython", "python"):
        obj = make_objective(axis_space.points, weights, costs, trace, 1.0, force=force)
        assert obj.value(lam) == np.inf


@needs_compiled
def test_backend_matches_estimator_formulas():
    rng = np.random.default_rng(55)
    space, pop, profile = random_instance(rng)
    scal = scal_of(2.0)
    weights = estimator.potential_weights(space, pop)
    obj = make_objective(space.points, weights, pop.costs, scal, 1.0, force="cython")
    grad = np.empty_like(profile)
    value = obj.value_and_grad(profile, grad)
    assert value == pytest.approx(estimator.potential(space, pop, profile, scal), rel=1e-12)
    expected_grad = estimator.potential_gradient(space, pop, profile, scal)
    assert np.allclose(grad, expected_grad, rtol=1e-10, atol=1e-13)


def test_custom_costs_fall_back_to_python(point_space, trace):
    cost = ProvisionCost.custom(
        lambda x: np.asarray(x, dtype=float) ** 2,
        lambda x: 2.0 * np.asarray(x, dtype=float),
        2, 2, label="square",
    )
    obj = make_objective(point_space.points, np.ones((1, 1)), [cost], trace, 1.0)
    grad = np.empty((1, 1))
    value = obj.value_and_grad(np.full((1, 1), 2.0), grad)
    assert value == pytest.approx(4.0 + 0.5)
    assert grad[0, 0] == pytest.approx(4.0 - 0.25)
    assert obj.__class__.__module__.endswith("_kernels_py")
