"""Information matrices, estimation costs, gradients and a GLS simulation.

All operations are pure functions of their inputs (plus an explicit seed for
the Monte Carlo ones).  A singular information matrix maps to a +inf cost
sentinel rather than an exception, so line searches can reject such steps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CountMismatch,
    ExactTooLarge,
    SingularDrawMass,
    SingularInformation,
    TooManyDegenerateDraws,
    ZeroPrecision,
)
from .model import as_profile_matrix

EIG_FLOOR = 1e-10
EXACT_ENUM_LIMIT = 10**6


@dataclass(frozen=True)
class InformationMatrix:
    """Expected information matrix with its invertibility verdict."""

    matrix: np.ndarray
    invertible: bool
    min_eigenvalue: float


@dataclass(frozen=True)
class ModelParameters:
    """Coefficients of the linear model being estimated."""

    beta: np.ndarray


def potential_weights(space, pop):
    """W[t, x] = n_t * mu(x): the weight of each (type, point) cell in the
    expected provision cost and in the information matrix."""
    return pop.multiplicities[:, None] * space.mu[None, :]


def info_matrix(space, pop, profile):
    """M = sum_x mu(x) (sum_t n_t lam_t(x)) x x^T."""
    lam = as_profile_matrix(profile)
    wx = np.einsum("tx,tx->x", potential_weights(space, pop), lam)
    m_mat = space.points.T @ (wx[:, None] * space.points)
    min_eig = float(np.linalg.eigvalsh(m_mat)[0])
    return InformationMatrix(m_mat, min_eig > EIG_FLOOR, min_eig)


def _inverse_or_none(m_mat):
    if np.linalg.eigvalsh(m_mat)[0] <= EIG_FLOOR:
        return None
    return np.linalg.solve(m_mat, np.eye(m_mat.shape[0]))


def gls_cost(space, pop, profile, scal):
    """F(M^-1), or +inf when the information matrix is not invertible."""
    v = _inverse_or_none(info_matrix(space, pop, profile).matrix)
    if v is None:
        return math.inf
    return scal.value(v)


def gls_cost_gradient(space, pop, profile, scal):
    """d gls_cost / d lam_t(x) = -n_t mu(x) x^T M^-1 G M^-1 x, G = grad F(M^-1)."""
    lam = as_profile_matrix(profile)
    v = _inverse_or_none(info_matrix(space, pop, lam).matrix)
    if v is None:
        raise SingularInformation("gradient undefined: information matrix is singular")
    b_mat = v @ scal.gradient(v) @ v
    s = np.einsum("xi,ij,xj->x", space.points, b_mat, space.points)
    return -potential_weights(space, pop) * s[None, :]


def provision_cost(space, pop, profile):
    """Total expected provision cost sum_t n_t E[c_t(lam_t(x))]."""
    lam = as_profile_matrix(profile)
    w = potential_weights(space, pop)
    return float(sum(np.dot(w[t], cost.value(lam[t])) for t, cost in enumerate(pop.costs)))


def potential(space, pop, profile, scal):
    """Provision cost plus estimation cost; minimizers are the equilibria."""
    return provision_cost(space, pop, profile) + gls_cost(space, pop, profile, scal)


def potential_gradient(space, pop, profile, scal):
    lam = as_profile_matrix(profile)
    w = potential_weights(space, pop)
    grad = gls_cost_gradient(space, pop, lam, scal)
    for t, cost in enumerate(pop.costs):
        grad[t] += w[t] * cost.derivative(lam[t])
    return grad


def social_cost(space, pop, profile, scal):
    """Provision cost plus n times the estimation cost."""
    return provision_cost(space, pop, profile) + pop.n * gls_cost(space, pop, profile, scal)


def complete_info_potential(space, pop, counts, profile, scal):
    """Potential of the game in which realized per-type attribute counts are
    common knowledge; counts[t, x] players of type t hold attribute x."""
    lam = as_profile_matrix(profile)
    counts = np.asarray(counts, dtype=float)
    if counts.shape != lam.shape or counts.shape[0] != pop.n_types:
        raise CountMismatch(f"counts shape {counts.shape} does not match profile")
    row_sums = counts.sum(axis=1)
    if not np.array_equal(row_sums, pop.multiplicities):
        raise CountMismatch(
            f"per-type counts {row_sums} do not sum to multiplicities {pop.multiplicities}"
        )
    prov = sum(
        float(np.dot(counts[t], cost.value(lam[t]))) for t, cost in enumerate(pop.costs)
    )
    wx = np.einsum("tx,tx->x", counts, lam)
    m_mat = space.points.T @ (wx[:, None] * space.points)
    v = _inverse_or_none(m_mat)
    if v is None:
        return math.inf
    return prov + scal.value(v)


def joint_info_matrix(space, joint, profile):
    """Expected information matrix under a joint attribute law.

    `profile` is per-agent here: an (n, m) matrix of precisions.
    """
    lam = np.atleast_2d(np.asarray(profile, dtype=float))
    if lam.shape[0] != joint.n:
        raise CountMismatch(f"profile has {lam.shape[0]} rows, joint law has n={joint.n}")
    agents = np.arange(joint.n)
    m_mat = np.zeros((space.d, space.d))
    for idx, prob in zip(joint.assignments, joint.probs):
        xs = space.points[idx]
        weights = lam[agents, idx]
        m_mat += prob * (xs.T @ (weights[:, None] * xs))
    min_eig = float(np.linalg.eigvalsh(m_mat)[0])
    return InformationMatrix(m_mat, min_eig > EIG_FLOOR, min_eig)


# ---------------------------------------------------------------------------
# Ordinary least squares
# ---------------------------------------------------------------------------

def _agent_types(pop):
    return np.repeat(np.arange(pop.n_types), pop.multiplicities.astype(int))


def _compositions(total, parts):
    """All ways to split `total` identical agents over `parts` points."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def ols_cost(space, pop, profile, scal, mode="exact", samples=10000, seed=0):
    """F of the expected OLS covariance E[S^-1 (sum_i x_i x_i^T / lam_i) S^-1],
    S = sum_i x_i x_i^T.

    Exact mode aggregates the m^n equally-weighted assignments by their
    per-type point counts; it requires m^n <= 10^6.  Monte Carlo mode
    averages over seeded draws.  Assignments with singular S are skipped
    only if they carry < 1e-9 total probability.
    """
    lam = as_profile_matrix(profile)
    if np.any(lam <= 0.0):
        raise ZeroPrecision("the OLS covariance needs every precision strictly positive")
    if mode == "exact":
        return scal.value(_ols_mean_cov_exact(space, pop, lam))
    mean_cov, _ = ols_mean_cov_monte_carlo(space, pop, lam, samples, seed)
    return scal.value(mean_cov)


def _ols_mean_cov_exact(space, pop, lam):
    n = pop.n
    if space.m**n > EXACT_ENUM_LIMIT:
        raise ExactTooLarge(f"{space.m}^{n} assignments exceed the exact cutoff")
    outer = np.einsum("xi,xj->xij", space.points, space.points)
    log_mu = np.log(space.mu)
    mults = pop.multiplicities.astype(int)
    acc = np.zeros((space.d, space.d))
    skipped = 0.0
    per_type = [list(_compositions(int(n_t), space.m)) for n_t in mults]
    for combo in itertools.product(*per_type):
        counts = np.asarray(combo, dtype=float)  # (T, m)
        log_p = 0.0
        for t, n_t in enumerate(mults):
            log_p += math.lgamma(n_t + 1) - sum(
                math.lgamma(k + 1) for k in combo[t]
            ) + float(np.dot(counts[t], log_mu))
        prob = math.exp(log_p)
        total_counts = counts.sum(axis=0)
        s_mat = np.einsum("x,xij->ij", total_counts, outer)
        if np.linalg.eigvalsh(s_mat)[0] <= EIG_FLOOR:
            skipped += prob
            continue
        q_mat = np.einsum("tx,xij->ij", counts / lam, outer)
        s_inv = np.linalg.solve(s_mat, np.eye(space.d))
        acc += prob * (s_inv @ q_mat @ s_inv)
    if skipped >= 1e-9:
        raise SingularDrawMass(
            f"singular assignments carry probability {skipped!r} >= 1e-9"
        )
    return acc


def ols_mean_cov_monte_carlo(space, pop, profile, samples, seed):
    """Monte Carlo estimate of the expected OLS covariance matrix.

    Returns (mean matrix, entrywise standard error of that mean).  Any draw
    with singular S indicates non-negligible singular mass and raises.
    """
    lam = as_profile_matrix(profile)
    if np.any(lam <= 0.0):
        raise ZeroPrecision("the OLS covariance needs every precision strictly positive")
    rng = np.random.default_rng(seed)
    types = _agent_types(pop)
    n = types.size
    idx = rng.choice(space.m, size=(samples, n), p=space.mu)
    xs = space.points[idx]  # (samples, n, d)
    s_mats = np.einsum("bni,bnj->bij", xs, xs)
    eigs = np.linalg.eigvalsh(s_mats)
    if np.any(eigs[:, 0] <= EIG_FLOOR):
        bad = int(np.sum(eigs[:, 0] <= EIG_FLOOR))
        raise SingularDrawMass(
            f"{bad}/{samples} sampled assignments have singular S; "
            "singular mass is not negligible"
        )
    inv_lam = (1.0 / lam)[types[None, :], idx]  # (samples, n)
    q_mats = np.einsum("bn,bni,bnj->bij", inv_lam, xs, xs)
    s_inv = np.linalg.inv(s_mats)
    covs = s_inv @ q_mats @ s_inv
    mean = covs.mean(axis=0)
    stderr = covs.std(axis=0, ddof=1) / math.sqrt(samples)
    return mean, stderr


# ---------------------------------------------------------------------------
# Monte Carlo GLS simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GlsSimulation:
    """Empirical behaviour of the GLS estimate under the model's noise."""

    empirical_cov: np.ndarray
    theoretical_cov: np.ndarray  # mean of per-draw (sum lam x x^T)^-1
    mean_beta: np.ndarray
    beta: np.ndarray
    trials: int
    degenerate_draws: int
    cov_stderr: np.ndarray
    beta_stderr: np.ndarray


def simulate_gls(space, pop, profile, beta, trials, seed):
    """Draw attributes and noisy responses, fit GLS per trial, and compare the
    empirical covariance of the estimates with the mean per-draw covariance.

    Draws whose information matrix is singular are resampled (counted in
    `degenerate_draws`); if they exceed a 1e-3 fraction the instance violates
    the near-sure invertibility precondition and the simulation aborts.
    """
    lam = as_profile_matrix(profile)
    beta = np.atleast_1d(np.asarray(getattr(beta, "beta", beta), dtype=float))
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    types = _agent_types(pop)
    n = types.size
    d = space.d
    betas = np.empty((trials, d))
    theo_sum = np.zeros((d, d))
    filled = 0
    degenerate = 0
    max_degenerate = max(100, int(1e-3 * trials))
    rounds = 0
    while filled < trials:
        rounds += 1
        if rounds > 200:
            raise TooManyDegenerateDraws("resampling made no progress")
        batch = trials - filled
        idx = rng.choice(space.m, size=(batch, n), p=space.mu)
        lam_draw = lam[types[None, :], idx]
        xs = space.points[idx]
        m_mats = np.einsum("bn,bni,bnj->bij", lam_draw, xs, xs)
        good = np.linalg.eigvalsh(m_mats)[:, 0] > EIG_FLOOR
        degenerate += int(np.sum(~good))
        if degenerate > max_degenerate:
            raise TooManyDegenerateDraws(
                f"{degenerate} degenerate draws; the per-draw information matrix "
                "must be invertible with probability ~1"
            )
        noise_sd = np.where(lam_draw > 0.0, 1.0 / np.sqrt(np.where(lam_draw > 0, lam_draw, 1.0)), 0.0)
        ys = xs @ beta + noise_sd * rng.standard_normal((batch, n))
        rhs = np.einsum("bn,bni,bn->bi", lam_draw, xs, ys)
        n_good = int(np.sum(good))
        if n_good:
            solved = np.linalg.solve(m_mats[good], rhs[good][..., None])[..., 0]
            betas[filled : filled + n_good] = solved
            theo_sum += np.linalg.inv(m_mats[good]).sum(axis=0)
            filled += n_good
    mean_beta = betas.mean(axis=0)
    centered = betas - mean_beta
    if trials > 1:
        empirical = centered.T @ centered / (trials - 1)
    else:
        empirical = np.zeros((d, d))
    products = np.einsum("bi,bj->bij", centered, centered)
    cov_stderr = products.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.full((d, d), np.nan)
    beta_stderr = betas.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.full(d, np.nan)
    return GlsSimulation(
        empirical_cov=empirical,
        theoretical_cov=theo_sum / trials,
        mean_beta=mean_beta,
        beta=beta,
        trials=trials,
        degenerate_draws=degenerate,
        cov_stderr=cov_stderr,
        beta_stderr=beta_stderr,
    )
