"""Executable checks for the game's structural results: design equivalence,
scaling law, asymptotic rate envelope, price of anarchy, degradation ratio,
and the complete-information comparison experiment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import estimator, solver
from .errors import (
    BadExponents,
    BoundFactorUndefined,
    InvalidCost,
    NonMonomial,
    NonPositiveValue,
    NotConverged,
)
from .model import (
    COST_MONOMIAL,
    DesignMeasure,
    PlayerPopulation,
    PrecisionProfile,
    ProvisionCost,
    as_profile_matrix,
)


# ---------------------------------------------------------------------------
# Rate envelope and scaling law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AsymptoticBounds:
    """Exponents of the estimation-cost envelope

        d * n^-(upper_exponent + alpha) <= cost <= D * n^-upper_exponent

    with n-independent constants d, D (reported empirically, not derived)."""

    upper_exponent: float
    alpha: float

    @property
    def lower_exponent(self):
        return self.upper_exponent + self.alpha


def asymptotic_bounds(p_min, p_max, q):
    """Envelope exponents for costs pinched between degrees p_min and p_max.

    upper_exponent = q (p_min - 1) / (p_min + q)
    alpha          = q (p_max - p_min)(q + 1) / (p_max (q + p_min))

    `p_max` may be infinite; alpha then takes its limit q(q+1)/(q+p_min).
    """
    if not (1.0 <= p_min <= p_max) or q < 1.0:
        raise BadExponents(f"need 1 <= p_min <= p_max and q >= 1, got ({p_min}, {p_max}, {q})")
    upper = q * (p_min - 1.0) / (p_min + q)
    if math.isinf(p_max):
        alpha = q * (q + 1.0) / (q + p_min)
    else:
        alpha = q * (p_max - p_min) * (q + 1.0) / (p_max * (q + p_min))
    return AsymptoticBounds(upper_exponent=upper, alpha=alpha)


def scaling_prediction(space, scal, pop, single_profile):
    """Predicted n-player equilibrium from a single-agent minimizer.

    For n identical monomial-p players the per-player equilibrium profile is
    n^(-(1+q)/(p+q)) times the single-agent minimizer, and the equilibrium
    estimation cost is n^(-q(p-1)/(p+q)) times the single-agent cost.
    Returns (predicted profile, predicted estimation cost).
    """
    kinds = {cost.kind for cost in pop.costs}
    exps = {cost.params[0] for cost in pop.costs if cost.kind == COST_MONOMIAL}
    if kinds != {COST_MONOMIAL} or len(exps) != 1:
        raise NonMonomial("the scaling law applies to identical monomial costs only")
    p = exps.pop()
    q = scal.q
    n = pop.n
    lam0 = as_profile_matrix(single_profile)
    reference_pop = PlayerPopulation.identical(pop.costs[0], 1)
    cost0 = estimator.gls_cost(space, reference_pop, lam0, scal)
    profile = np.tile(lam0[0], (pop.n_types, 1)) * n ** (-(1.0 + q) / (p + q))
    predicted = n ** (-q * (p - 1.0) / (p + q)) * cost0
    return PrecisionProfile(profile), predicted


def degradation_ratio(n, p, q):
    """Growth rate n^(q(q+1)/(p+q)) of equilibrium vs fixed-precision
    estimation cost."""
    if p < 1 or q < 1 or n < 1:
        raise BadExponents(f"need p, q >= 1 and n >= 1, got ({n}, {p}, {q})")
    return float(n) ** (q * (q + 1.0) / (p + q))


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log(value) against log(n)."""

    slope: float
    intercept: float
    residual: float  # max absolute log residual
    points: tuple


def rate_fit(points):
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 3:
        raise ValueError("rate fitting needs at least 3 points")
    if any(v <= 0.0 for _, v in pts):
        raise NonPositiveValue("rate fitting needs strictly positive values")
    log_n = np.log([n for n, _ in pts])
    log_v = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(log_n, log_v, 1)
    residual = float(np.abs(log_v - (slope * log_n + intercept)).max())
    return RateFit(float(slope), float(intercept), residual, tuple(pts))


# ---------------------------------------------------------------------------
# Design equivalence
# ---------------------------------------------------------------------------

def equilibrium_design_measure(space, pop, profile):
    """nu(x) = mu(x) * sum_t n_t lam_t(x); unnormalized, total mass nu.b."""
    lam = as_profile_matrix(profile)
    nu = space.mu * np.einsum("t,tx->x", pop.multiplicities, lam)
    return DesignMeasure(nu)


def design_criterion(space, scal, measure):
    """F(M(nu)^-1) for a (normalized or not) design measure."""
    nu = measure.nu if isinstance(measure, DesignMeasure) else np.asarray(measure, float)
    m_mat = space.points.T @ (nu[:, None] * space.points)
    if np.linalg.eigvalsh(m_mat)[0] <= 1e-12:
        return math.inf
    return scal.value(np.linalg.solve(m_mat, np.eye(space.d)))


@dataclass(frozen=True)
class DesignGap:
    tv_distance: float
    criterion_gap: float  # authoritative: optimal designs may be non-unique
    criterion: float
    criterion_reference: float


def design_equivalence_gap(space, scal, measure, reference):
    """Compare a normalized design measure with a reference optimal design.

    Reports the total-variation distance and the criterion gap
    F(measure) - F(reference); the criterion gap is the authoritative
    optimality test."""
    nu = measure.normalized()
    nu_star = reference.normalized()
    tv = 0.5 * float(np.abs(nu.nu - nu_star.nu).sum())
    crit = design_criterion(space, scal, nu)
    crit_star = design_criterion(space, scal, nu_star)
    return DesignGap(tv, crit - crit_star, crit, crit_star)


# ---------------------------------------------------------------------------
# Price of anarchy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoaReport:
    poa: float
    bound: float
    sc_equilibrium: float
    sc_optimum: float

    @property
    def ratio_to_bound(self):
        return self.poa / self.bound


def poa_report(space, pop, scal, opts=None):
    """Price of anarchy against its n^(q/(p_min+q)) ceiling.

    The solved equilibrium stands in for the worst one: all equilibria share
    the estimation cost, and provision costs agree at any potential minimizer.
    """
    eq = solver.minimize_potential(space, pop, scal, opts)
    opt = solver.minimize_social_cost(space, pop, scal, opts)
    if not (eq.converged and opt.converged):
        raise NotConverged("equilibrium or social-optimum solve did not converge")
    sc_eq = estimator.social_cost(space, pop, eq.profile, scal)
    sc_opt = estimator.social_cost(space, pop, opt.profile, scal)
    poa = sc_eq / sc_opt
    bound = float(pop.n) ** (scal.q / (pop.p_min + scal.q))
    assert poa <= bound * (1.0 + 1e-6), f"price of anarchy {poa} exceeds bound {bound}"
    return PoaReport(poa=poa, bound=bound, sc_equilibrium=sc_eq, sc_optimum=sc_opt)


# ---------------------------------------------------------------------------
# Complete-information comparison
# ---------------------------------------------------------------------------

def equivalence_bound_factors(space, pop, epsilon):
    """Concentration factors for realized attribute counts.

    r_plus  = max over x, t of (mu(x) + n_t^(eps-1/2)) / mu(x)
    r_minus = max over x, t of mu(x) / (mu(x) - n_t^(eps-1/2))

    Raises BoundFactorUndefined when mu(x) - n_t^(eps-1/2) <= 0 somewhere.
    """
    if not 0.0 < epsilon < 0.5:
        raise BoundFactorUndefined("epsilon must lie strictly between 0 and 1/2")
    r_plus = 1.0
    r_minus = 1.0
    for _, n_t in pop.types:
        dev = float(n_t) ** (epsilon - 0.5)
        for mu_x in space.mu:
            if mu_x - dev <= 0.0:
                raise BoundFactorUndefined(
                    f"mu(x)={float(mu_x)!r} - n_t^(eps-1/2)={dev!r} is not positive"
                )
            r_plus = max(r_plus, (mu_x + dev) / mu_x)
            r_minus = max(r_minus, mu_x / (mu_x - dev))
    return r_plus, r_minus


@dataclass(frozen=True)
class EquivalenceTrial:
    counts: np.ndarray
    phi_ci_eq: float          # complete-information potential at its own equilibrium
    phi_ci_at_model_eq: float  # complete-information potential at the model equilibrium
    phi_at_ci_eq: float        # model potential at the complete-information equilibrium
    sandwich_lower_ok: bool
    sandwich_upper_ok: bool
    exchange_ci_ok: bool
    exchange_model_ok: bool

    @property
    def passed(self):
        return (self.sandwich_lower_ok and self.sandwich_upper_ok
                and self.exchange_ci_ok and self.exchange_model_ok)


@dataclass(frozen=True)
class EquivalenceReport:
    epsilon: float
    trials: tuple
    phi_model: float
    r_plus: float
    r_minus: float
    pass_fraction: float
    probability_floor: float
    allowance: float


_INEQ_SLACK = 1e-9  # relative slack absorbing solver tolerances


def equivalence_check(space, pop, scal, epsilon, trials, seed, opts=None):
    """Sample realized attribute counts, solve the complete-information game,
    and check the potential sandwich and both exchange inequalities per trial.

    Asserts that the empirical pass fraction is at least the concentration
    floor 1 - |X| sum_t 2 exp(-2 n_t^(2 eps)) minus a 3-standard-error
    Monte Carlo allowance.
    """
    p_max = pop.p_max
    if math.isinf(p_max):
        raise InvalidCost("the comparison needs a finite upper homogeneity degree")
    r_plus, r_minus = equivalence_bound_factors(space, pop, epsilon)
    q = scal.q
    lo_factor = r_plus ** -(p_max - 1.0)
    hi_factor = r_minus ** (p_max - 1.0)
    d_n = max(r_plus, r_minus**q)
    d_n_prime = max(r_minus, r_plus**q)

    base = solver.minimize_potential(space, pop, scal, opts)
    if not base.converged:
        raise NotConverged("model equilibrium solve did not converge")
    phi_model = base.potential_value
    rng = np.random.default_rng(seed)
    records = []
    for _ in range(trials):
        counts = np.stack([rng.multinomial(int(n_t), space.mu) for _, n_t in pop.types])
        ci = solver.minimize_complete_info(space, pop, counts, scal, opts)
        if not ci.converged:
            raise NotConverged("complete-information solve did not converge")
        phi_ci_eq = ci.potential_value
        phi_ci_at_model = estimator.complete_info_potential(space, pop, counts, base.profile, scal)
        phi_at_ci = estimator.potential(space, pop, ci.profile, scal)
        slack = 1.0 + _INEQ_SLACK
        records.append(EquivalenceTrial(
            counts=counts,
            phi_ci_eq=phi_ci_eq,
            phi_ci_at_model_eq=phi_ci_at_model,
            phi_at_ci_eq=phi_at_ci,
            sandwich_lower_ok=lo_factor * phi_model <= phi_ci_eq * slack,
            sandwich_upper_ok=phi_ci_eq <= hi_factor * phi_model * slack,
            exchange_ci_ok=phi_ci_at_model <= d_n * r_plus ** (p_max - 1.0) * phi_ci_eq * slack,
            exchange_model_ok=phi_at_ci <= d_n_prime * hi_factor * phi_model * slack,
        ))
    pass_fraction = sum(r.passed for r in records) / trials
    tail = space.m * sum(2.0 * math.exp(-2.0 * float(n_t) ** (2.0 * epsilon)) for _, n_t in pop.types)
    floor = max(0.0, 1.0 - tail)
    allowance = 3.0 * math.sqrt(max(floor * (1.0 - floor), 0.0) / trials)
    assert pass_fraction >= floor - allowance, (
        f"pass fraction {pass_fraction} below floor {floor} - {allowance}"
    )
    return EquivalenceReport(
        epsilon=epsilon,
        trials=tuple(records),
        phi_model=phi_model,
        r_plus=r_plus,
        r_minus=r_minus,
        pass_fraction=pass_fraction,
        probability_floor=floor,
        allowance=allowance,
    )


# ---------------------------------------------------------------------------
# OLS counterexample family (single-point space, one prohibitively expensive
# agent alongside n regular monomial agents)
# ---------------------------------------------------------------------------

def ols_counterexample_population(n, p):
    regular = ProvisionCost.monomial(p)
    expensive = ProvisionCost.linear(float(n + 1) ** 2)
    return PlayerPopulation(((regular, int(n)), (expensive, 1)))


def ols_counterexample_equilibrium(n, p):
    """Closed-form equilibrium of the OLS game on the single-point space.

    Stationarity of c_t(l) + (n+1)^-2 / l per type gives
        regular:   l = (p (n+1)^2)^(-1/(p+1))
        expensive: l = (n+1)^-2
    """
    lam_regular = (p * float(n + 1) ** 2) ** (-1.0 / (p + 1.0))
    lam_expensive = float(n + 1) ** -2.0
    return PrecisionProfile(np.array([[lam_regular], [lam_expensive]]))


def ols_counterexample_cost(n, p):
    """Exact OLS estimation cost at the closed-form equilibrium:
    n p^(1/(p+1)) (n+1)^(2/(p+1) - 2) + 1."""
    return n * p ** (1.0 / (p + 1.0)) * float(n + 1) ** (2.0 / (p + 1.0) - 2.0) + 1.0


def ols_counterexample_reference(n, p):
    """Simplified closed form that drops the p-dependent constant:
    n (n+1)^(2/(p+1) - 2) + 1."""
    return n * float(n + 1) ** (2.0 / (p + 1.0) - 2.0) + 1.0


def solve_ols_counterexample(n, p):
    """Numerically minimize the (separable) OLS potential per cost type.

    Independent of the closed forms above: each type's scalar objective
    c_t(l) + (n+1)^-2 / l is minimized by bounded scalar search.
    """
    pop = ols_counterexample_population(n, p)
    inv_sq = float(n + 1) ** -2.0
    lams = []
    for cost, _ in pop.types:
        res = minimize_scalar(
            lambda ell, c=cost: float(c.value(ell)) + inv_sq / ell,
            bounds=(1e-9, 10.0),
            method="bounded",
            options={"xatol": 1e-13},
        )
        lams.append(res.x)
    return pop, PrecisionProfile(np.array(lams)[:, None])
