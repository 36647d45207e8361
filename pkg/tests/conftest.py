import numpy as np
import pytest

from glsgame import (
    PlayerPopulation,
    ProvisionCost,
    Scalarization,
    build_attribute_space,
    polynomial_design_space,
)


@pytest.fixture
def point_space():
    """Single attribute vector [1]; the scalar sandbox for closed forms."""
    return build_attribute_space([[1.0]])


@pytest.fixture
def axis_space():
    """Standard basis of R^2 with uniform probabilities."""
    return build_attribute_space([[1.0, 0.0], [0.0, 1.0]])


@pytest.fixture
def poly4_space():
    return polynomial_design_space(4, range(-10, 11))


@pytest.fixture
def trace():
    return Scalarization.trace()


def identical_pop(p, n):
    cost = ProvisionCost.linear(1.0) if p == 1.0 else ProvisionCost.monomial(p)
    return PlayerPopulation.identical(cost, n)


def scal_of(q):
    return Scalarization.trace() if q == 1.0 else Scalarization.pow_trace(q)


def random_instance(rng, kinds=("linear", "monomial", "polynomial", "cosh")):
    """Random small game: full-rank attribute set, random costs and profile."""
    d = int(rng.integers(1, 4))
    m = int(rng.integers(d, d + 3))
    while True:
        pts = rng.uniform(-2.0, 2.0, size=(m, d))
        if np.linalg.matrix_rank(pts) == d:
            break
    mu = rng.uniform(0.2, 1.0, size=m)
    mu /= mu.sum()
    space = build_attribute_space(pts, mu)
    types = []
    for _ in range(int(rng.integers(1, 3))):
        kind = kinds[int(rng.integers(0, len(kinds)))]
        if kind == "linear":
            cost = ProvisionCost.linear(float(rng.uniform(0.5, 3.0)))
        elif kind == "monomial":
            cost = ProvisionCost.monomial(float(rng.uniform(1.0, 3.5)))
        elif kind == "polynomial":
            cost = ProvisionCost.polynomial(
                rng.uniform(0.2, 2.0, size=2), sorted(rng.uniform(1.0, 4.0, size=2))
            )
        else:
            cost = ProvisionCost.cosh_minus_one()
        types.append((cost, int(rng.integers(1, 5))))
    pop = PlayerPopulation(tuple(types))
    profile = rng.uniform(0.2, 2.0, size=(pop.n_types, space.m))
    return space, pop, profile
