"""Exception types shared across the package."""


class ParakernError(Exception):
    """Base class for all package errors."""


class NonPositiveTau(ParakernError):
    """An operation requiring tau > 0 received tau <= 0."""


class ZeroTau(ParakernError):
    """Kernel derivatives are undefined at tau = 0."""


class SingularMatrix(ParakernError):
    """Cholesky factorization failed; the averaged matrix is not SPD."""


class QuadratureFailure(ParakernError):
    """Requested tolerance not met at maximum refinement."""


class GridTooCoarse(ParakernError):
    """Grid spacing cannot resolve the requested operation."""


class PaddingTooSmall(ParakernError):
    """Function support reaches the boundary collar reserved for convolution."""


class EpsilonBelowGrid(ParakernError):
    """Truncation radius smaller than the grid can resolve."""


class DimensionMismatch(ParakernError):
    """Operands live in different dimensions."""


class RadiusBelowGrid(ParakernError):
    """Ball radius smaller than one grid cell."""


class NonIntegrableWeight(ParakernError):
    """Weight (or its dual power) is not locally integrable."""


class DegenerateDenominator(ParakernError):
    """Ratio estimation received an identically-zero denominator."""


class ConfigError(ParakernError):
    """Invalid experiment configuration."""
