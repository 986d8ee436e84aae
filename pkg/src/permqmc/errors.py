"""Exception hierarchy shared by all modules."""


class PermQMCError(Exception):
    """Base class for library errors."""


class ParameterDomain(PermQMCError, ValueError):
    """Parameters outside the admissible range of a formula."""


class DivergentSeries(ParameterDomain):
    """A decay series with exponent <= 1 was requested."""


class AssumptionViolated(ParameterDomain):
    """``2 beta1 / (beta0 R(m)^(2 alpha)) <= 1`` fails."""


class TooManyPermutations(PermQMCError):
    """The invariant coordinate block is too large to enumerate."""


class TailToleranceExceeded(PermQMCError):
    """A truncated sum could not be certified below the requested tolerance."""


class SearchSpaceTooLarge(PermQMCError):
    """Exhaustive enumeration over generating vectors is infeasible."""


class NegativeSquareBeyondTolerance(PermQMCError):
    """A squared worst-case error came out negative beyond its error budget."""
