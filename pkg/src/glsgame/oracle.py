"""Independent ground-truth generators, used only by the test suite.

These deliberately avoid the solver and the shared evaluation kernel: values
come from brute-force grids, closed forms, finite differences, and an
away-step Frank-Wolfe solver, so they can certify the production paths.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InfiniteValue, TooManyVariables
from .model import F_LINEAR_MAP, F_POW_TRACE, F_SQ_FROBENIUS, F_TRACE, as_profile_matrix

GRID_VARIABLE_LIMIT = 3


@dataclass(frozen=True)
class GridSpec:
    """Search box [lo, hi] per variable and the target resolution."""

    lo: float
    hi: float
    pitch: float


def _batched_criterion(v_mats, scal):
    if scal.kind == F_TRACE:
        return np.trace(v_mats, axis1=1, axis2=2)
    if scal.kind == F_POW_TRACE:
        return np.trace(v_mats, axis1=1, axis2=2) ** scal.q
    if scal.kind == F_SQ_FROBENIUS:
        return np.sum(v_mats * v_mats, axis=(1, 2))
    if scal.kind == F_LINEAR_MAP:
        return np.einsum("ij,bij->b", scal.weight, v_mats)
    return np.array([scal.value(v) for v in v_mats])


def _batched_potential(space, pop, lams, scal):
    """Potential values for a (K, T, m) batch of profiles, +inf where the
    information matrix is singular.  Uses np.linalg.inv, a different
    inversion route than the production kernel."""
    weights = pop.multiplicities[:, None] * space.mu[None, :]
    provision = np.zeros(lams.shape[0])
    for t, cost in enumerate(pop.costs):
        provision += cost.value(lams[:, t, :]) @ weights[t]
    wx = np.einsum("tx,btx->bx", weights, lams)
    m_mats = np.einsum("bx,xi,xj->bij", wx, space.points, space.points)
    eigs = np.linalg.eigvalsh(m_mats)
    ok = eigs[:, 0] > 1e-10
    values = np.full(lams.shape[0], np.inf)
    if np.any(ok):
        v_mats = np.linalg.inv(m_mats[ok])
        values[ok] = provision[ok] + _batched_criterion(v_mats, scal)
    return values


def _grid_pass(space, pop, scal, axes):
    """Evaluate the potential on the product grid and return the best point."""
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([m.ravel() for m in mesh], axis=1)  # (K, nvars)
    n_types, m = pop.n_types, space.m
    lams = flat.reshape(-1, n_types, m)
    values = _batched_potential(space, pop, lams, scal)
    best = int(np.argmin(values))
    return flat[best], float(values[best])


def grid_minimize_potential(space, pop, scal, grid_spec):
    """Brute-force potential minimization: coarse grid pass, then one local
    refinement at the requested pitch.  Limited to 3 decision variables."""
    n_vars = pop.n_types * space.m
    if n_vars > GRID_VARIABLE_LIMIT:
        raise TooManyVariables(f"{n_vars} variables exceed the brute-force limit")
    span = grid_spec.hi - grid_spec.lo
    coarse_steps = max(8, int(math.sqrt(span / grid_spec.pitch)) + 1)
    coarse = np.linspace(grid_spec.lo, grid_spec.hi, coarse_steps + 1)
    best, _ = _grid_pass(space, pop, scal, [coarse] * n_vars)
    half = span / coarse_steps
    axes = []
    for center in best:
        lo = max(grid_spec.lo, center - half)
        hi = min(grid_spec.hi, center + half)
        count = max(3, int(round((hi - lo) / grid_spec.pitch)) + 1)
        axes.append(np.linspace(lo, hi, count))
    best, value = _grid_pass(space, pop, scal, axes)
    from .model import PrecisionProfile

    return PrecisionProfile(best.reshape(pop.n_types, space.m)), value


def closed_form_1d(n, p, q):
    """Single-point space, n identical monomial-p players, powered trace of
    degree q: stationarity of n l^p + (n l)^-q gives

        l*  = (q/p)^(1/(p+q)) * n^(-(q+1)/(p+q))
        C   = (p/q)^(q/(p+q)) * n^(-q(p-1)/(p+q))

    Returns (per-player precision, estimation cost).
    """
    ell = (q / p) ** (1.0 / (p + q)) * float(n) ** (-(q + 1.0) / (p + q))
    cost = (p / q) ** (q / (p + q)) * float(n) ** (-q * (p - 1.0) / (p + q))
    return ell, cost


def fd_gradient(fn, profile, h=None):
    """Central finite differences of a profile-to-real function."""
    lam = as_profile_matrix(profile).copy()
    grad = np.empty_like(lam)
    for ij in np.ndindex(lam.shape):
        step = h if h is not None else 1e-5 * (1.0 + abs(lam[ij]))
        old = lam[ij]
        lam[ij] = old + step
        hi = fn(lam)
        lam[ij] = old - step
        lo = fn(lam)
        lam[ij] = old
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise InfiniteValue(f"function not finite near coordinate {ij}")
        grad[ij] = (hi - lo) / (2.0 * step)
    return grad


# ---------------------------------------------------------------------------
# Design oracles
# ---------------------------------------------------------------------------

def _design_criterion_and_grad(space, scal, nu):
    m_mat = space.points.T @ (nu[:, None] * space.points)
    if np.linalg.eigvalsh(m_mat)[0] <= 1e-12:
        return np.inf, None
    v = np.linalg.inv(m_mat)
    b_mat = v @ scal.gradient(v) @ v
    grad = -np.einsum("xi,ij,xj->x", space.points, b_mat, space.points)
    return scal.value(v), grad


def frank_wolfe_design(space, scal, tol=1e-9, max_iters=100000):
    """Away-step Frank-Wolfe minimization of F(M(nu)^-1) over the simplex.

    Returns (nu, criterion, duality gap).  Kept independent of the projected
    gradient design solver so the two can certify each other.
    """
    m = space.m
    nu = np.full(m, 1.0 / m)
    gap = np.inf
    value = np.inf
    for _ in range(max_iters):
        value, grad = _design_criterion_and_grad(space, scal, nu)
        towards = int(np.argmin(grad))
        gap = float(np.dot(grad, nu) - grad[towards])
        if gap <= tol * (1.0 + abs(value)):
            break
        support = np.flatnonzero(nu > 0)
        away = support[int(np.argmax(grad[support]))]
        fw_dir = -nu.copy()
        fw_dir[towards] += 1.0
        away_dir = nu.copy()
        away_dir[away] -= 1.0
        use_away = float(np.dot(grad, away_dir)) < float(np.dot(grad, fw_dir))
        if use_away:
            direction = away_dir
            step_max = nu[away] / (1.0 - nu[away]) if nu[away] < 1.0 else np.inf
        else:
            direction = fw_dir
            step_max = 1.0
        step = _segment_linesearch(space, scal, nu, direction, step_max)
        if step <= 0.0:
            break
        nu = np.clip(nu + step * direction, 0.0, None)
        total = nu.sum()
        if abs(total - 1.0) > 1e-14:
            nu /= total
    return nu, value, gap


def _segment_linesearch(space, scal, nu, direction, step_max, iters=48):
    """Golden-section search for the criterion along nu + step*direction."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, min(step_max, 1e14)
    if not math.isfinite(hi):
        hi = 1.0

    def val(step):
        candidate = np.clip(nu + step * direction, 0.0, None)
        value, _ = _design_criterion_and_grad(space, scal, candidate)
        return value

    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = val(c), val(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = val(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = val(d)
    return 0.5 * (a + b)


def grid_minimize_design(space, scal, pitch=1e-3):
    """Brute-force design search on a simplex grid (m <= 3) with refinement."""
    if space.m > 3:
        raise TooManyVariables("simplex grid search is limited to m <= 3 points")
    best_nu, best_val = None, np.inf

    def evaluate(nu):
        nonlocal best_nu, best_val
        value, _ = _design_criterion_and_grad(space, scal, nu)
        if value < best_val:
            best_val, best_nu = value, nu.copy()

    coarse = 0.02
    for nu in _simplex_grid(space.m, coarse):
        evaluate(nu)
    center = best_nu.copy()
    for nu in _simplex_grid(space.m, pitch, center=center, radius=2 * coarse):
        evaluate(nu)
    return best_nu, best_val


def _simplex_grid(m, pitch, center=None, radius=None):
    steps = int(round(1.0 / pitch))
    if m == 1:
        yield np.ones(1)
        return
    free = m - 1
    ranges = []
    for i in range(free):
        if center is None:
            ranges.append(range(steps + 1))
        else:
            lo = max(0, int((center[i] - radius) * steps))
            hi = min(steps, int((center[i] + radius) * steps) + 1)
            ranges.append(range(lo, hi + 1))
    for combo in itertools.product(*ranges):
        total = sum(combo)
        if total <= steps:
            nu = np.array([c / steps for c in combo] + [(steps - total) / steps])
            yield nu
