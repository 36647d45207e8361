"""Projected-gradient solvers with first-order convergence certificates.

One descent loop serves every solve: potential and social-cost minimization
over the nonnegative orthant (clamped to a large precision cap), the
complete-information potential, and the optimal-design problem over the
probability simplex.  Steps are Barzilai-Borwein with Armijo backtracking;
the line search rejects any step whose information matrix is singular
(the objective evaluates to +inf there).

Near-linear monomial costs need one extra device: off-support equilibrium
precisions can be positive yet hundreds of orders of magnitude below every
other coordinate, unreachable by any shared step size.  Such cells are
pinned to the root of their scalar optimality condition by an outer
active-set loop and released if they ever grow macroscopic; the reported
KKT residual is always the unmasked one, so certificates stay honest.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import estimator
from ._backend import make_objective
from .errors import SingularInformation
from .model import DesignMeasure, PrecisionProfile, as_profile_matrix


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iters: int = 200_000
    armijo_c: float = 1e-4
    shrink: float = 0.5
    initial_step: float = 1.0
    step_min: float = 1e-12
    step_max: float = 1e6
    l_max: float = 1e6
    init: object = None  # None -> uniform 1/n; float -> uniform; array; "random"
    seed: int = None


@dataclass(frozen=True)
class EquilibriumResult:
    profile: PrecisionProfile
    potential_value: float
    estimation_cost: float
    kkt_residual: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class DesignResult:
    measure: DesignMeasure
    criterion: float
    duality_gap: float
    iterations: int
    converged: bool


def box_kkt_residual(lam, grad):
    """First-order violation on the nonnegative orthant:
    max over coordinates of max(-g, min(lam, |lam * g|))."""
    return float(np.maximum(-grad, np.minimum(lam, np.abs(lam * grad))).max())


def project_simplex(v):
    """Euclidean projection onto the probability simplex (Michelot's
    active-support reduction)."""
    v = np.asarray(v, dtype=float)
    active = np.ones(v.size, dtype=bool)
    while True:
        shift = (v[active].sum() - 1.0) / active.sum()
        keep = active & (v - shift > 0.0)
        if keep.sum() == active.sum():
            break
        if not keep.any():  # numerical corner: keep the largest coordinate
            active = np.zeros_like(active)
            active[int(np.argmax(v))] = True
            break
        active = keep
    out = np.where(active, v - (v[active].sum() - 1.0) / active.sum(), 0.0)
    return np.maximum(out, 0.0)


def _descent(objective, x0, project, certificate, opts, diag_steps=False):
    """Monotone projected-gradient loop with BB steps and Armijo backtracking.

    `certificate(x, g, f)` returns the convergence measure compared against
    opts.tol.  With `diag_steps` the BB quotient is kept per coordinate
    (valid for box constraints, where a positive diagonal scaling still
    yields a descent direction); the simplex solve uses the scalar form.
    Returns (x, f, grad, certificate value, iterations, converged).
    """
    x = project(np.array(x0, dtype=float))
    grad = np.empty_like(x)
    f = objective.value_and_grad(x, grad)
    if not np.isfinite(f):
        raise SingularInformation("initial point has a singular information matrix")
    res = certificate(x, grad, f)
    if res <= opts.tol:
        return x, f, grad, res, 0, True
    step = np.full_like(x, opts.initial_step) if diag_steps else opts.initial_step
    grad_new = np.empty_like(x)
    fresh_steps = True
    for iteration in range(1, opts.max_iters + 1):
        trial = 1.0
        accepted = False
        for _ in range(200):
            cand = project(x - (trial * step) * grad)
            direction = cand - x
            if not direction.any():
                break  # projected step is a fixed point; certificate decides
            slope = min(float(np.vdot(grad, direction)), 0.0)
            f_cand = objective.value(cand)
            if np.isfinite(f_cand) and f_cand <= f + opts.armijo_c * slope:
                accepted = True
                break
            trial *= opts.shrink
            if trial * np.max(step) < opts.step_min:
                break
        if not accepted:
            if diag_steps and not fresh_steps:
                # one badly scaled diagonal entry can poison the whole step;
                # retry once from uniform steps before giving up
                step[...] = opts.initial_step
                fresh_steps = True
                continue
            res = certificate(x, grad, f)
            return x, f, grad, res, iteration, res <= opts.tol
        fresh_steps = False
        f_new = objective.value_and_grad(cand, grad_new)
        s_vec = cand - x
        y_vec = grad_new - grad
        if diag_steps:
            sy_vec = s_vec * y_vec
            update = sy_vec > 0.0
            if np.any(update):
                step[update] = np.clip(s_vec[update] / y_vec[update],
                                       opts.step_min, opts.step_max)
        else:
            sy = float(np.vdot(s_vec, y_vec))
            if sy > 0.0:
                step = float(np.clip(float(np.vdot(s_vec, s_vec)) / sy,
                                     opts.step_min, opts.step_max))
            else:
                step = min(step * trial / opts.shrink, opts.step_max)
        x, f = cand, f_new
        grad, grad_new = grad_new, grad
        res = certificate(x, grad, f)
        if res <= opts.tol:
            return x, f, grad, res, iteration, True
    return x, f, grad, res, opts.max_iters, False


def _initial_profile(space, pop, weights, opts):
    shape = (pop.n_types, space.m)
    init = opts.init
    if init is None:
        lam0 = np.full(shape, 1.0 / pop.n)
    elif isinstance(init, str) and init == "random":
        rng = np.random.default_rng(opts.seed)
        lam0 = rng.uniform(0.2, 1.8, size=shape) / pop.n
    elif np.isscalar(init):
        lam0 = np.full(shape, float(init))
    else:
        lam0 = np.array(as_profile_matrix(init), dtype=float)
        if lam0.shape != shape:
            raise ValueError(f"init shape {lam0.shape} != {shape}")
    lam0[weights == 0.0] = 0.0  # irrelevant cells pinned to zero by convention
    return lam0


# Active-set thresholds for unreachable near-zero coordinates.
_TRAP_LAMBDA = 1e-3  # stalled cells at or below this precision are candidates
_PIN_ROOT = 1e-4  # pin cells whose stationary precision falls below this
_RELEASE_ROOT = 1e-3  # release pinned cells whose root grows beyond this
_ROOT_FLOOR = 1e-280


def _marginal_root_bound(cost, target, hi):
    """Root of c'(l) = target on [0, hi] by log bisection; None if c'(hi)
    is still below the target (the root is larger than hi)."""
    if float(cost.derivative(hi)) < target:
        return None
    if float(cost.derivative(_ROOT_FLOOR)) >= target:
        return 0.0
    lo_log, hi_log = np.log(_ROOT_FLOOR), np.log(hi)
    for _ in range(200):
        mid = 0.5 * (lo_log + hi_log)
        if float(cost.derivative(np.exp(mid))) < target:
            lo_log = mid
        else:
            hi_log = mid
    return float(np.exp(0.5 * (lo_log + hi_log)))


def _pin_value(objective, lam, cell, upper, scratch):
    """Stationary value of one coordinate, others held fixed.

    `upper` bounds the root from above (raising the precision only lowers
    the marginal benefit), so the cell's own gradient sign is bisected on a
    log bracket below it."""
    if upper <= _ROOT_FLOOR:
        return 0.0
    t, x = cell
    keep = lam[t, x]
    lo_log, hi_log = np.log(_ROOT_FLOOR), np.log(upper)
    for _ in range(120):
        mid = 0.5 * (lo_log + hi_log)
        lam[t, x] = np.exp(mid)
        objective.value_and_grad(lam, scratch)
        if scratch[t, x] < 0.0:
            lo_log = mid
        else:
            hi_log = mid
    lam[t, x] = keep
    return float(np.exp(0.5 * (lo_log + hi_log)))


def _cell_target(cost, lam_tx, grad_tx, weight):
    """Marginal benefit kappa*s(x) recovered from g = w (c'(l) - kappa s)."""
    return float(cost.derivative(lam_tx)) - grad_tx / weight


def _cell_gradient_root(objective, lam, cell, g0, l_max, scratch):
    """Zero of one coordinate's partial derivative, others held fixed.

    Works directly on the gradient sign, which stays reliable far below the
    resolution of objective-value differences; that makes it the right tool
    once Armijo progress hits the evaluation noise floor.  Returns the new
    coordinate value, or None if no bracket was found.
    """
    t, x = cell
    keep = lam[t, x]

    def g_at(v):
        lam[t, x] = v
        objective.value_and_grad(lam, scratch)
        return scratch[t, x]

    try:
        if g0 < 0.0:  # grow the coordinate
            hi = max(keep, _ROOT_FLOOR)
            found = False
            for _ in range(500):
                hi = min(hi * 8.0, l_max)
                if g_at(hi) >= 0.0:
                    found = True
                    break
                if hi >= l_max:
                    return l_max  # optimum sits at the precision cap
            if not found:
                return None
            lo = max(keep, _ROOT_FLOOR)
        else:  # shrink the coordinate
            hi = keep
            lo = keep
            for _ in range(500):
                lo = lo / 8.0
                if lo < _ROOT_FLOOR:
                    if g_at(0.0) >= 0.0:
                        return 0.0
                    lo = _ROOT_FLOOR
                    break
                if g_at(lo) <= 0.0:
                    break
        a, b = np.log(lo), np.log(hi)
        for _ in range(160):
            mid = 0.5 * (a + b)
            if g_at(np.exp(mid)) < 0.0:
                a = mid
            else:
                b = mid
        return float(np.exp(0.5 * (a + b)))
    finally:
        lam[t, x] = keep


def _interior_refine(objective, lam, grad, weights, mask, opts):
    """One Gauss-Seidel pass of exact per-coordinate minimization over the
    cells still violating the first-order condition; used when the line
    search can no longer certify decrease against evaluation noise."""
    scratch = np.empty_like(lam)
    live_grad = grad.copy()
    changed = False
    for t in range(lam.shape[0]):
        for x in range(lam.shape[1]):
            if mask[t, x] or weights[t, x] <= 0.0:
                continue
            term = max(-live_grad[t, x],
                       min(lam[t, x], abs(lam[t, x] * live_grad[t, x])))
            if term <= 0.5 * opts.tol:
                continue
            root = _cell_gradient_root(objective, lam, (t, x), live_grad[t, x],
                                       opts.l_max, scratch)
            if root is not None and root != lam[t, x]:
                lam[t, x] = root
                changed = True
                objective.value_and_grad(lam, live_grad)
    return changed


# Descent runs in bounded chunks so that slowly crawling instances are
# periodically interrupted by the exact coordinate repairs below.
_DESCENT_CHUNK = 5000


def _minimize_weighted(space, pop, weights, kappa, scal, opts):
    """Shared driver for the box-constrained solves.

    Returns (lam, value, grad, true KKT residual, iterations, converged).
    """
    objective = make_objective(space.points, weights, pop.costs, scal, kappa)
    lam = _initial_profile(space, pop, weights, opts)
    mask = np.zeros_like(lam, dtype=bool)
    scratch = np.empty_like(lam)
    total_iters = 0
    value = np.inf
    grad = np.empty_like(lam)
    outer_cap = max(40, opts.max_iters // _DESCENT_CHUNK + 10)
    for _outer in range(outer_cap):
        budget = opts.max_iters - total_iters
        if budget <= 0:
            break
        pinned = lam.copy()

        def project(v, mask=mask, pinned=pinned):
            np.clip(v, 0.0, opts.l_max, out=v)
            v[mask] = pinned[mask]
            return v

        def certificate(x, g, _f, mask=mask):
            r = np.maximum(-g, np.minimum(x, np.abs(x * g)))
            r[mask] = 0.0
            return float(r.max())

        lam, value, grad, _res, iters, free_ok = _descent(
            objective, lam, project, certificate,
            replace(opts, max_iters=min(budget, _DESCENT_CHUNK)), diag_steps=True)
        total_iters += iters
        if not free_ok and total_iters >= opts.max_iters:
            break  # iteration budget exhausted; report honestly below
        if not free_ok:
            # pin cells whose stationary precision no step size can reach
            new_pins = []
            for t, cost in enumerate(pop.costs):
                for x in range(lam.shape[1]):
                    if mask[t, x] or weights[t, x] <= 0.0:
                        continue
                    if lam[t, x] > _TRAP_LAMBDA or grad[t, x] >= 0.0:
                        continue
                    target = _cell_target(cost, lam[t, x], grad[t, x], weights[t, x])
                    upper = _marginal_root_bound(cost, target, _PIN_ROOT)
                    if upper is not None:
                        new_pins.append(((t, x), upper))
            if not new_pins:
                if _interior_refine(objective, lam, grad, weights, mask, opts):
                    continue
                break  # genuine stall; report the honest residual below
            for cell, upper in new_pins:
                lam[cell] = _pin_value(objective, lam, cell, upper, scratch)
                mask[cell] = True
            continue
        # free coordinates converged; refresh pinned cells at the final
        # information matrix and release any that grew macroscopic
        value = objective.value_and_grad(lam, grad)
        changed = False
        for t, cost in enumerate(pop.costs):
            for x in range(lam.shape[1]):
                if not mask[t, x]:
                    continue
                target = _cell_target(cost, lam[t, x], grad[t, x], weights[t, x])
                upper = _marginal_root_bound(cost, target, _RELEASE_ROOT * 10)
                if upper is None or upper > _RELEASE_ROOT:
                    mask[t, x] = False  # macroscopic after all; free it
                    changed = True
                    continue
                new = _pin_value(objective, lam, (t, x), upper, scratch)
                if new != lam[t, x]:
                    lam[t, x] = new
                    changed = True
        value = objective.value_and_grad(lam, grad)
        res = box_kkt_residual(lam, grad)
        if res <= opts.tol:
            return lam, value, grad, res, total_iters, True
        if not changed:
            break  # pins are exact yet the residual stays; give up honestly
    value = objective.value_and_grad(lam, grad)
    if not np.isfinite(value):
        return lam, value, grad, np.inf, total_iters, False
    res = box_kkt_residual(lam, grad)
    return lam, value, grad, res, total_iters, res <= opts.tol


def minimize_potential(space, pop, scal, opts=None):
    """Equilibrium profile as the potential's minimizer over nonnegative
    type-symmetric precisions."""
    opts = opts or SolverOptions()
    weights = estimator.potential_weights(space, pop)
    lam, value, _g, res, iters, ok = _minimize_weighted(space, pop, weights, 1.0, scal, opts)
    est = estimator.gls_cost(space, pop, lam, scal)
    return EquilibriumResult(PrecisionProfile(lam), value, est, res, iters, ok)


def minimize_social_cost(space, pop, scal, opts=None):
    """Socially optimal profile; same contract as minimize_potential with the
    estimation term weighted by the player count."""
    opts = opts or SolverOptions()
    weights = estimator.potential_weights(space, pop)
    lam, value, _g, res, iters, ok = _minimize_weighted(
        space, pop, weights, float(pop.n), scal, opts
    )
    est = estimator.gls_cost(space, pop, lam, scal)
    return EquilibriumResult(PrecisionProfile(lam), value, est, res, iters, ok)


def minimize_complete_info(space, pop, counts, scal, opts=None):
    """Minimize the potential of the game with realized attribute counts."""
    opts = opts or SolverOptions()
    counts = np.asarray(counts, dtype=float)
    lam, value, _g, res, iters, ok = _minimize_weighted(space, pop, counts, 1.0, scal, opts)
    wx = np.einsum("tx,tx->x", counts, lam)
    m_mat = space.points.T @ (wx[:, None] * space.points)
    est = np.inf
    if np.linalg.eigvalsh(m_mat)[0] > estimator.EIG_FLOOR:
        est = scal.value(np.linalg.solve(m_mat, np.eye(space.d)))
    return EquilibriumResult(PrecisionProfile(lam), value, est, res, iters, ok)


def kkt_residual(space, pop, profile, scal):
    """First-order certificate for a candidate equilibrium profile."""
    lam = as_profile_matrix(profile)
    grad = estimator.potential_gradient(space, pop, lam, scal)  # raises if singular
    return box_kkt_residual(lam, grad)


def _design_exchange(objective, nu, grad, scratch):
    """One pairwise mass exchange from the worst support atom toward the best
    vertex, with the step found by bisecting the directional derivative sign
    (reliable below the resolution of value differences).  Returns True if
    mass moved."""
    flat = nu.ravel()
    g = grad.ravel()
    towards = int(np.argmin(g))
    support = np.flatnonzero(flat > 0.0)
    away = int(support[np.argmax(g[support])])
    if away == towards or g[away] <= g[towards]:
        return False
    base_t, base_a = flat[towards], flat[away]
    max_step = base_a

    def slope_at(step):
        flat[towards] = base_t + step
        flat[away] = base_a - step
        objective.value_and_grad(nu, scratch)
        sg = scratch.ravel()
        return sg[towards] - sg[away]

    if slope_at(max_step) <= 0.0:
        return True  # the atom leaves the support entirely
    lo, hi = 0.0, max_step
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if slope_at(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    step = 0.5 * (lo + hi)
    flat[towards] = base_t + step
    flat[away] = base_a - step
    return step > 0.0


def solve_optimal_design(space, scal, opts=None):
    """Minimize F(M(nu)^-1) over probability measures nu on the attribute set.

    Projected gradient with simplex projection; convergence is certified by
    the linearization (Frank-Wolfe) gap relative to the criterion value.
    Once value differences hit the evaluation noise floor, the remaining gap
    is closed by pairwise mass exchanges driven by gradient signs.
    """
    opts = opts or SolverOptions()
    weights = np.ones((1, space.m))
    objective = make_objective(space.points, weights, None, scal, 1.0)
    nu = np.full((1, space.m), 1.0 / space.m)
    project = lambda v: project_simplex(v.ravel()).reshape(1, -1)  # noqa: E731

    def certificate(nu_mat, grad, value):
        gap = float(np.vdot(grad, nu_mat) - grad.min())
        return gap / (1.0 + abs(value))

    total_iters = 0
    value = np.inf
    res = np.inf
    ok = False
    grad = np.empty_like(nu)
    scratch = np.empty_like(nu)
    while total_iters < opts.max_iters:
        budget = opts.max_iters - total_iters
        nu, value, grad, res, iters, ok = _descent(
            objective, nu, project, certificate, replace(opts, max_iters=budget))
        total_iters += iters
        if ok or iters >= budget:
            break
        moved = False
        for _ in range(4 * space.m):
            if not _design_exchange(objective, nu, grad, scratch):
                break
            moved = True
            value = objective.value_and_grad(nu, grad)
            res = certificate(nu, grad, value)
            if res <= opts.tol:
                break
        if res <= opts.tol:
            ok = True
            break
        if not moved:
            break
    return DesignResult(
        measure=DesignMeasure(nu.ravel()),
        criterion=value,
        duality_gap=res * (1.0 + abs(value)),
        iterations=total_iters,
        converged=ok,
    )
