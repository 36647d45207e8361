#!/usr/bin/env python3
"""Compare the compiled evaluation kernel with the pure NumPy fallback.

Times single objective evaluations and full equilibrium solves on
representative instances, then prints a table with speedups.

Usage: python benchmarks/bench_backends.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from glsgame import (
    PlayerPopulation,
    ProvisionCost,
    Scalarization,
    build_attribute_space,
    estimator,
    polynomial_design_space,
    solver,
)
from glsgame._backend import compiled_available, make_objective


def instances():
    point = build_attribute_space([[1.0]])
    poly4 = polynomial_design_space(4, range(-10, 11))
    trace = Scalarization.trace()
    yield ("1-pt, 768 players, p=2",
           point, PlayerPopulation.identical(ProvisionCost.monomial(2.0), 768), trace)
    yield ("poly d=4, 10 players, p=1.2",
           poly4, PlayerPopulation.identical(ProvisionCost.monomial(1.2), 10), trace)
    yield ("poly d=4, 10 players, p=3",
           poly4, PlayerPopulation.identical(ProvisionCost.monomial(3.0), 10), trace)
    hetero = PlayerPopulation(((ProvisionCost.monomial(2.0), 512),
                               (ProvisionCost.monomial(3.0), 256)))
    yield ("1-pt, 768 players, mixed p", point, hetero, trace)


def time_eval(objective, lam, repeats):
    grad = np.empty_like(lam)
    objective.value_and_grad(lam, grad)  # warm up
    best = np.inf
    for _ in range(repeats):
        n = 2000
        start = time.perf_counter()
        for _ in range(n):
            objective.value_and_grad(lam, grad)
        best = min(best, (time.perf_counter() - start) / n)
    return best


def time_solve(space, pop, scal, backend, repeats):
    import glsgame._backend as backend_mod

    saved = backend_mod.BACKEND
    backend_mod.BACKEND = backend
    try:
        best = np.inf
        result = None
        for _ in range(repeats):
            start = time.perf_counter()
            result = solver.minimize_potential(space, pop, scal)
            best = min(best, time.perf_counter() - start)
        return best, result
    finally:
        backend_mod.BACKEND = saved


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not compiled_available():
        print("compiled kernel not built; showing the pure backend only")
    header = (f"{'instance':34} {'eval py':>10} {'eval cy':>10} {'x':>6}"
              f" {'solve py':>10} {'solve cy':>10} {'x':>6}")
    print(header)
    print("-" * len(header))
    for name, space, pop, scal in instances():
        weights = estimator.potential_weights(space, pop)
        lam = np.full((pop.n_types, space.m), 1.0 / pop.n)
        pure = make_objective(space.points, weights, pop.costs, scal, 1.0, force="python")
        t_pure = time_eval(pure, lam, args.repeats)
        solve_pure, res_pure = time_solve(space, pop, scal, "python", 1)
        if compiled_available():
            fast = make_objective(space.points, weights, pop.costs, scal, 1.0, force="cython")
            t_fast = time_eval(fast, lam, args.repeats)
            solve_fast, res_fast = time_solve(space, pop, scal, "cython", 1)
            drift = abs(res_fast.estimation_cost - res_pure.estimation_cost)
            assert drift <= 1e-9 * (1 + res_pure.estimation_cost), name
            print(f"{name:34} {t_pure*1e6:8.1f}us {t_fast*1e6:8.1f}us "
                  f"{t_pure/t_fast:5.1f}x {solve_pure*1e3:8.1f}ms "
                  f"{solve_fast*1e3:8.1f}ms {solve_pure/solve_fast:5.1f}x")
        else:
            print(f"{name:34} {t_pure*1e6:8.1f}us {'-':>10} {'-':>6}"
                  f" {solve_pure*1e3:8.1f}ms {'-':>10} {'-':>6}")


if __name__ == "__main__":
    main()
