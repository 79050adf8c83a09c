"""Exception types raised by betacopula.

All of them derive from :class:`ValueError` so that callers doing plain
argument validation keep working.
"""


class BetaCopulaError(ValueError):
    """Base class for all library errors."""


class TieError(BetaCopulaError):
    """Duplicate values found in a column while ties are not allowed."""


class DimensionError(BetaCopulaError):
    """Input has an unsupported number of columns."""


class DomainError(BetaCopulaError):
    """Argument outside the domain of a function or model."""


class OmegaError(DomainError):
    """Weight exponent outside [0, 1/2)."""


class GammaError(DomainError):
    """Cramér-von Mises weight exponent outside [0, 2)."""


class QuadratureError(BetaCopulaError):
    """Two quadrature refinement levels disagree beyond tolerance."""


class RegionEmpty(BetaCopulaError):
    """No probe point could be placed in the requested boundary region."""


class SampleError(BetaCopulaError):
    """Malformed sample data (missing cells, non-finite values, bad shape)."""
