"""Exception types raised across the package."""


class DomainError(ValueError):
    """A point lies outside the domain of a kernel or copula."""


class NumericalPSDError(ArithmeticError):
    """A Gram quadratic form is negative beyond round-off."""


class InvalidCopulaError(ValueError):
    """A density grid violates the copula marginal constraints."""


class FitError(ValueError):
    """A log-linear fit received unusable data."""


class PreconditionError(ValueError):
    """Bound evaluator called outside the regime it covers."""


class ApproxBoundError(AssertionError):
    """The approximation-error inequality failed on a discretized problem."""


class StatisticsError(ValueError):
    """Too few Monte Carlo replicates for the requested statistic."""


class ProblemError(ValueError):
    """A constructed quadratic problem violates its stated assumptions."""
