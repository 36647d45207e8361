"""Exception taxonomy shared by all modules."""


class GlsGameError(Exception):
    """Base class for all errors raised by this package."""


# -- model construction ------------------------------------------------------

class ZeroProbability(GlsGameError):
    """An attribute probability is zero or negative."""


class DegenerateMoment(GlsGameError):
    """The second-moment matrix of the attribute space is not positive definite."""


class DuplicatePoint(GlsGameError):
    """Two attribute vectors compare equal."""


class InvalidCost(GlsGameError):
    """A provision cost fails its nonnegativity/monotonicity/convexity or
    homogeneity-bound grid checks."""


class InvalidScalarization(GlsGameError):
    """A scalarization fails its homogeneity, monotonicity or gradient checks."""


# -- estimator ---------------------------------------------------------------

class SingularInformation(GlsGameError):
    """The information matrix is singular where an invertible one is required."""


class ZeroPrecision(GlsGameError):
    """A strictly positive precision profile is required."""


class ExactTooLarge(GlsGameError):
    """Exact enumeration of attribute assignments exceeds the size cutoff."""


class SingularDrawMass(GlsGameError):
    """Non-negligible probability mass on singular attribute assignments."""


class CountMismatch(GlsGameError):
    """Realized attribute counts are inconsistent with the population."""


class TooManyDegenerateDraws(GlsGameError):
    """The per-draw information matrix is singular too often to simulate."""


# -- solver ------------------------------------------------------------------

class NotConverged(GlsGameError):
    """Iteration budget exhausted before the convergence certificate held."""


# -- analysis ----------------------------------------------------------------

class NonMonomial(GlsGameError):
    """An operation defined only for identical monomial costs was called with
    a different population."""


class BadExponents(GlsGameError):
    """Homogeneity exponents outside their valid range."""


class NonPositiveValue(GlsGameError):
    """A log-log fit received a value that is not strictly positive."""


class ZeroMass(GlsGameError):
    """A design measure with zero total mass cannot be normalized."""


class BoundFactorUndefined(GlsGameError):
    """The population is too small for the chosen concentration exponent."""


# -- oracle ------------------------------------------------------------------

class TooManyVariables(GlsGameError):
    """Brute-force minimization is limited to very few decision variables."""


class InfiniteValue(GlsGameError):
    """A finite-difference stencil hit an infinite function value."""


# -- cli ---------------------------------------------------------------------

class ConfigError(GlsGameError):
    """A config file failed to parse or resolve; carries a line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"config line {line}: {message}"
        super().__init__(message)
