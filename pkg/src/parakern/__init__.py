"""Kernels, solution operators, and weighted mixed-norm analysis for the
parabolic equation d_t u - a^{ij}(t) d_ij u + u = f with time-measurable
uniformly elliptic coefficients."""

from . import analysis, coeffs, corrections, grids, kernel, operators
from .errors import ParakernError

__version__ = "0.1.0"
__all__ = ["analysis", "coeffs", "corrections", "grids", "kernel",
           "operators", "ParakernError", "__version__"]
