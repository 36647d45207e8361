"""Domain types: attribute spaces, provision costs, scalarizations, populations.

Everything here is immutable after construction and validated eagerly, so the
solver and analysis layers can assume well-formed inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateMoment,
    DuplicatePoint,
    InvalidCost,
    InvalidScalarization,
    ZeroProbability,
)

# Tolerances used by the constructors.
PROB_SUM_TOL = 1e-12
MOMENT_EIG_FLOOR = 1e-10
CONVEXITY_SLACK = 1e-10
HOMOGENEITY_RTOL = 1e-9

# Finite stand-in for an unbounded upper homogeneity degree.  Used only when
# grid-checking cost families whose true upper degree is infinite (hyperbolic
# cosine); asymptotic predictions for such costs report the lower-degree
# bound only.
COSH_PMAX_SURROGATE = 12.0

# Grids for the construction-time cost checks.  Kept small: checks run once
# per cost object, never in the solver loop.  The uniform grid feeds the
# second-difference convexity check; the log grid feeds the homogeneity one.
_CHECK_UNIFORM = np.linspace(0.0, 2.0, 41)
_CHECK_ELLS = np.concatenate([np.logspace(-3, 0.3, 12), [2.0]])
_CHECK_SCALES = np.array([1.5, 2.0, 4.0, 10.0])


# ---------------------------------------------------------------------------
# Attribute space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttributeSpace:
    """Finite set of attribute vectors with a full-support distribution.

    Attributes
    ----------
    points : (m, d) array
        One attribute vector per row.
    mu : (m,) array
        Strictly positive probabilities summing to one.
    labels : tuple of str, optional
        Display labels, e.g. the abscissae of a polynomial design grid.
    """

    points: np.ndarray
    mu: np.ndarray
    labels: tuple = None

    @property
    def m(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def second_moment(self):
        """E[x x^T] under mu."""
        return self.points.T @ (self.mu[:, None] * self.points)

    def point_label(self, i):
        if self.labels is not None:
            return self.labels[i]
        return " ".join(repr(float(v)) for v in self.points[i])


def build_attribute_space(points, mu=None, labels=None):
    """Validate and build an :class:`AttributeSpace`.

    Raises
    ------
    ZeroProbability
        If some probability is <= 0 or the probabilities do not sum to one.
    DegenerateMoment
        If E[x x^T] is not positive definite.
    DuplicatePoint
        If two attribute vectors are exactly equal.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m, d = pts.shape
    if m < 1 or d < 1:
        raise DegenerateMoment("attribute space needs at least one point in R^d, d >= 1")
    if mu is None:
        mu = np.full(m, 1.0 / m)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (m,):
        raise ZeroProbability(f"mu has length {mu.shape}, expected {m}")
    if np.any(mu <= 0.0):
        raise ZeroProbability("all attribute probabilities must be strictly positive")
    if abs(mu.sum() - 1.0) > PROB_SUM_TOL:
        raise ZeroProbability(f"probabilities sum to {mu.sum()!r}, not 1")
    seen = set()
    for row in pts:
        key = tuple(row.tolist())
        if key in seen:
            raise DuplicatePoint(f"attribute vector {list(row)} appears twice")
        seen.add(key)
    moment = pts.T @ (mu[:, None] * pts)
    min_eig = float(np.linalg.eigvalsh(moment)[0])
    if min_eig <= MOMENT_EIG_FLOOR:
        raise DegenerateMoment(
            f"E[xx^T] has smallest eigenvalue {min_eig:.3e}; attribute vectors do not span R^{d}"
        )
    pts.setflags(write=False)
    mu.setflags(write=False)
    return AttributeSpace(points=pts, mu=mu, labels=tuple(labels) if labels else None)


def polynomial_design_space(degree, grid, mu=None):
    """Attribute space with rows [1, t, ..., t^(degree-1)] for t in `grid`.

    The distribution defaults to uniform over the grid.
    """
    grid = [float(t) for t in grid]
    if degree < 1:
        raise DegenerateMoment("degree must be >= 1")
    if len(set(grid)) < degree:
        raise DegenerateMoment(
            f"{len(set(grid))} distinct abscissae cannot span R^{degree}"
        )
    pts = np.vander(np.asarray(grid), N=degree, increasing=True)
    labels = [repr(t) for t in grid]
    return build_attribute_space(pts, mu, labels=labels)


# ---------------------------------------------------------------------------
# Provision costs
# ---------------------------------------------------------------------------

# kind tags shared with the compiled kernel
COST_NONE = 0
COST_LINEAR = 1
COST_MONOMIAL = 2
COST_POLYNOMIAL = 3
COST_COSH = 4
COST_CUSTOM = 5


@dataclass(frozen=True)
class ProvisionCost:
    """Per-agent cost of disclosing at a given precision.

    `value` and `derivative` act elementwise on arrays.  `p_min`/`p_max`
    certify the homogeneity envelope a^p_min c(l) <= c(a l) <= a^p_max c(l)
    for a > 1; `p_max` may be infinite (hyperbolic cosine), in which case the
    grid check uses :data:`COSH_PMAX_SURROGATE` instead.
    """

    kind: int
    params: tuple
    p_min: float
    p_max: float
    label: str
    _value_fn: object = field(default=None, repr=False)
    _deriv_fn: object = field(default=None, repr=False)

    # -- constructors --------------------------------------------------------

    @staticmethod
    def linear(a):
        if a <= 0:
            raise InvalidCost("linear cost needs a > 0")
        return _checked(ProvisionCost(COST_LINEAR, (float(a),), 1.0, 1.0, f"linear({a!r})"))

    @staticmethod
    def monomial(p):
        if p < 1:
            raise InvalidCost("monomial cost needs p >= 1")
        return _checked(ProvisionCost(COST_MONOMIAL, (float(p),), float(p), float(p), f"monomial({p!r})"))

    @staticmethod
    def polynomial(coeffs, degrees):
        coeffs = [float(c) for c in coeffs]
        degrees = [float(k) for k in degrees]
        if len(coeffs) != len(degrees) or not coeffs:
            raise InvalidCost("polynomial cost needs matching, nonempty coeffs and degrees")
        if any(c <= 0 for c in coeffs) or any(k < 1 for k in degrees):
            raise InvalidCost("polynomial cost needs positive coefficients and degrees >= 1")
        params = tuple(v for pair in zip(coeffs, degrees) for v in pair)
        label = "polynomial(" + "+".join(f"{c!r}*l^{k!r}" for c, k in zip(coeffs, degrees)) + ")"
        return _checked(ProvisionCost(COST_POLYNOMIAL, params, min(degrees), max(degrees), label))

    @staticmethod
    def monomial_sum(p_lo, p_hi):
        """sum of l^k for integer k from p_lo to p_hi."""
        degrees = list(range(int(p_lo), int(p_hi) + 1))
        return ProvisionCost.polynomial([1.0] * len(degrees), degrees)

    @staticmethod
    def cosh_minus_one():
        return _checked(ProvisionCost(COST_COSH, (), 2.0, math.inf, "cosh_minus_one"))

    @staticmethod
    def custom(value_fn, derivative_fn, p_min, p_max, label="custom"):
        """Custom cost; an analytic derivative is required (no numeric
        differentiation happens in the solver)."""
        if derivative_fn is None:
            raise InvalidCost("custom costs must supply an analytic derivative")
        c = ProvisionCost(COST_CUSTOM, (), float(p_min), float(p_max), label,
                          _value_fn=value_fn, _deriv_fn=derivative_fn)
        return _checked(c)

    # -- evaluation -----------------------------------------------------------

    def value(self, ell):
        ell = np.asarray(ell, dtype=float)
        if self.kind == COST_LINEAR:
            return self.params[0] * ell
        if self.kind == COST_MONOMIAL:
            return ell ** self.params[0]
        if self.kind == COST_POLYNOMIAL:
            out = np.zeros_like(ell)
            for c, k in zip(self.params[::2], self.params[1::2]):
                out += c * ell ** k
            return out
        if self.kind == COST_COSH:
            with np.errstate(over="ignore"):  # inf is the intended sentinel
                return np.cosh(ell) - 1.0
        return np.asarray(self._value_fn(ell), dtype=float)

    def derivative(self, ell):
        ell = np.asarray(ell, dtype=float)
        if self.kind == COST_LINEAR:
            return np.full_like(ell, self.params[0])
        if self.kind == COST_MONOMIAL:
            p = self.params[0]
            return p * ell ** (p - 1.0)
        if self.kind == COST_POLYNOMIAL:
            out = np.zeros_like(ell)
            for c, k in zip(self.params[::2], self.params[1::2]):
                out += c * k * ell ** (k - 1.0)
            return out
        if self.kind == COST_COSH:
            with np.errstate(over="ignore"):
                return np.sinh(ell)
        return np.asarray(self._deriv_fn(ell), dtype=float)

    @property
    def grid_p_max(self):
        return COSH_PMAX_SURROGATE if math.isinf(self.p_max) else self.p_max


def _checked(cost):
    """Grid checks: c(0)=0, nonnegative, nondecreasing, convex, and the
    declared homogeneity envelope on a fixed test grid."""
    v0 = float(np.asarray(cost.value(0.0)))
    if abs(v0) > 1e-12:
        raise InvalidCost(f"{cost.label}: value(0) = {v0!r}, expected 0")
    uniform_vals = cost.value(_CHECK_UNIFORM)
    scale = max(1.0, float(np.abs(uniform_vals).max()))
    if np.any(uniform_vals < -1e-12 * scale):
        raise InvalidCost(f"{cost.label}: negative values on the test grid")
    if np.any(np.diff(uniform_vals) < -1e-12 * scale):
        raise InvalidCost(f"{cost.label}: decreasing on the test grid")
    if np.any(np.diff(uniform_vals, 2) < -CONVEXITY_SLACK * scale):
        raise InvalidCost(f"{cost.label}: second differences < 0 on the test grid")
    vals = cost.value(_CHECK_ELLS)
    p_hi = cost.grid_p_max
    for a in _CHECK_SCALES:
        lo = a ** cost.p_min * vals
        hi = a ** p_hi * vals
        scaled = cost.value(a * _CHECK_ELLS)
        slack = HOMOGENEITY_RTOL * np.maximum(1.0, np.abs(scaled))
        if np.any(scaled < lo - slack) or np.any(scaled > hi + slack):
            raise InvalidCost(
                f"{cost.label}: homogeneity bounds (p_min={cost.p_min}, "
                f"p_max={p_hi}) violated at scale a={a}"
            )
    return cost


# ---------------------------------------------------------------------------
# Scalarizations
# ---------------------------------------------------------------------------

F_TRACE = 0
F_POW_TRACE = 1
F_SQ_FROBENIUS = 2
F_LINEAR_MAP = 3  # F(V) = <W, V> for a PSD weight matrix W


@dataclass(frozen=True)
class Scalarization:
    """Monotone, convex, positively homogeneous map from PSD matrices to reals."""

    kind: int
    q: float
    weight: np.ndarray = None  # only for F_LINEAR_MAP
    label: str = ""

    @staticmethod
    def trace():
        return Scalarization(F_TRACE, 1.0, label="trace")

    @staticmethod
    def pow_trace(q):
        if q < 1:
            raise InvalidScalarization("pow_trace needs q >= 1")
        return Scalarization(F_POW_TRACE, float(q), label=f"pow_trace({q!r})")

    @staticmethod
    def squared_frobenius():
        return Scalarization(F_SQ_FROBENIUS, 2.0, label="squared_frobenius")

    @staticmethod
    def average_mse(space, weights=None):
        """Average prediction variance over the attribute set (defaults to mu)."""
        rho = space.mu if weights is None else np.asarray(weights, dtype=float)
        if rho.shape != (space.m,) or np.any(rho < 0) or rho.sum() <= 0:
            raise InvalidScalarization("average_mse needs nonnegative weights over the space")
        rho = rho / rho.sum()
        w = space.points.T @ (rho[:, None] * space.points)
        w.setflags(write=False)
        return Scalarization(F_LINEAR_MAP, 1.0, weight=w, label="average_mse")

    @staticmethod
    def point_mse(points):
        """Summed prediction variance over a fixed list of query points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        w = pts.T @ pts
        w.setflags(write=False)
        return Scalarization(F_LINEAR_MAP, 1.0, weight=w, label="point_mse")

    def value(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == F_TRACE:
            return float(np.trace(v))
        if self.kind == F_POW_TRACE:
            return float(np.trace(v)) ** self.q
        if self.kind == F_SQ_FROBENIUS:
            return float(np.sum(v * v))
        return float(np.sum(self.weight * v))

    def gradient(self, v):
        """Matrix gradient of `value` at the symmetric matrix v."""
        v = np.asarray(v, dtype=float)
        d = v.shape[0]
        if self.kind == F_TRACE:
            return np.eye(d)
        if self.kind == F_POW_TRACE:
            return self.q * float(np.trace(v)) ** (self.q - 1.0) * np.eye(d)
        if self.kind == F_SQ_FROBENIUS:
            return 2.0 * v
        return self.weight.copy()


def check_scalarization(scal, d, rng, trials=20):
    """Sampled invariant checks: homogeneity of degree q, monotonicity in the
    PSD order, and agreement of the analytic gradient with central finite
    differences.  Raises InvalidScalarization on failure."""
    for _ in range(trials):
        a_mat = rng.standard_normal((d, d))
        v = a_mat @ a_mat.T + 0.1 * np.eye(d)
        base = scal.value(v)
        for a in (0.5, 2.0, 10.0):
            got = scal.value(a * v)
            want = a ** scal.q * base
            if abs(got - want) > HOMOGENEITY_RTOL * max(1.0, abs(want)):
                raise InvalidScalarization(f"{scal.label}: F({a}V) != {a}^q F(V)")
        w = rng.standard_normal(d)
        if scal.value(v + np.outer(w, w)) < base - 1e-12 * max(1.0, abs(base)):
            raise InvalidScalarization(f"{scal.label}: not monotone in the PSD order")
        grad = scal.gradient(v)
        h = 1e-6
        for _ in range(3):
            i, j = rng.integers(0, d, size=2)
            e = np.zeros((d, d))
            e[i, j] += 0.5
            e[j, i] += 0.5
            fd = (scal.value(v + h * e) - scal.value(v - h * e)) / (2 * h)
            an = 0.5 * (grad[i, j] + grad[j, i])
            if abs(fd - an) > 1e-6 * max(1.0, abs(fd)):
                raise InvalidScalarization(
                    f"{scal.label}: gradient mismatch at entry ({i},{j}): {an} vs fd {fd}"
                )
    return True


# ---------------------------------------------------------------------------
# Populations, profiles, design measures, joint distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlayerPopulation:
    """Cost types with multiplicities; players within a type are identical."""

    types: tuple  # of (ProvisionCost, int)

    def __post_init__(self):
        if not self.types:
            raise InvalidCost("population needs at least one cost type")
        for _, mult in self.types:
            if int(mult) < 1:
                raise InvalidCost("type multiplicities must be >= 1")

    @staticmethod
    def identical(cost, n):
        return PlayerPopulation(((cost, int(n)),))

    @property
    def n(self):
        return sum(mult for _, mult in self.types)

    @property
    def n_types(self):
        return len(self.types)

    @property
    def costs(self):
        return [c for c, _ in self.types]

    @property
    def multiplicities(self):
        return np.array([mult for _, mult in self.types], dtype=float)

    @property
    def p_min(self):
        return min(c.p_min for c, _ in self.types)

    @property
    def p_max(self):
        return max(c.p_max for c, _ in self.types)


@dataclass(frozen=True)
class PrecisionProfile:
    """Type-symmetric strategy state: entry (t, x) is the precision chosen by
    every player of cost type t for attribute x."""

    lam: np.ndarray  # (T, m)

    @staticmethod
    def uniform(value, n_types, m):
        return PrecisionProfile(np.full((n_types, m), float(value)))

    def validate(self, l_max=1e6):
        if np.any(self.lam < 0) or np.any(self.lam > l_max):
            raise InvalidCost(f"precisions must lie in [0, {l_max!r}]")
        return self

    def scaled(self, factor):
        return PrecisionProfile(self.lam * float(factor))


def as_profile_matrix(profile):
    """Accept either a PrecisionProfile or a bare (T, m) array."""
    lam = getattr(profile, "lam", profile)
    return np.atleast_2d(np.asarray(lam, dtype=float))


@dataclass(frozen=True)
class DesignMeasure:
    """Nonnegative measure on the attribute set; `b` is its total mass."""

    nu: np.ndarray

    @property
    def b(self):
        return float(self.nu.sum())

    @property
    def is_normalized(self):
        return abs(self.b - 1.0) <= PROB_SUM_TOL

    def normalized(self):
        from .errors import ZeroMass

        total = self.b
        if total <= 0.0:
            raise ZeroMass("cannot normalize a design measure with zero mass")
        return DesignMeasure(self.nu / total)


@dataclass(frozen=True)
class JointDistribution:
    """Joint law of the n agents' attribute indices, given by its support."""

    assignments: np.ndarray  # (k, n) integer indices into the space
    probs: np.ndarray  # (k,)

    @property
    def n(self):
        return self.assignments.shape[1]


def build_joint_distribution(space, assignments, probs):
    """Validate a joint attribute distribution against `space`.

    Requires positive probabilities summing to one and a positive definite
    expected total moment E[sum_i x_i x_i^T].
    """
    idx = np.atleast_2d(np.asarray(assignments, dtype=np.int64))
    pr = np.asarray(probs, dtype=float)
    if idx.shape[0] != pr.shape[0]:
        raise ZeroProbability("one probability per support assignment required")
    if np.any(pr <= 0):
        raise ZeroProbability("joint probabilities must be strictly positive")
    if abs(pr.sum() - 1.0) > PROB_SUM_TOL:
        raise ZeroProbability(f"joint probabilities sum to {pr.sum()!r}, not 1")
    if np.any(idx < 0) or np.any(idx >= space.m):
        raise ZeroProbability("assignment index out of range")
    moment = np.zeros((space.d, space.d))
    for row, p in zip(idx, pr):
        xs = space.points[row]
        moment += p * xs.T @ xs
    if np.linalg.eigvalsh(moment)[0] <= MOMENT_EIG_FLOOR:
        raise DegenerateMoment("E[sum_i x_i x_i^T] under the joint law is not positive definite")
    idx.setflags(write=False)
    pr.setflags(write=False)
    return JointDistribution(assignments=idx, probs=pr)
