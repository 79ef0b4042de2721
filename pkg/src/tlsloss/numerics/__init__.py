"""Numerical kernel: quadrature, special functions, roots and least squares."""
from .lsq import (
    DegenerateFitError,
    FitProblem,
    FitResult,
    PolyFit,
    fit_polynomial,
    nlls_fit,
    numeric_jacobian,
    polyfit,
    polyval,
)
from .peaks import fit_gaussians, gaussian, gaussian_sum
from .quadrature import QuadResult, QuadratureError, QuadratureSpec, integrate, quad
from .roots import BracketError, find_root
from .special import EULER_GAMMA, DomainError, bessel_k0, bessel_k0e, digamma

__all__ = [
    "BracketError",
    "DegenerateFitError",
    "DomainError",
    "EULER_GAMMA",
    "FitProblem",
    "FitResult",
    "PolyFit",
    "QuadResult",
    "QuadratureError",
    "QuadratureSpec",
    "bessel_k0",
    "bessel_k0e",
    "digamma",
    "find_root",
    "fit_gaussians",
    "fit_polynomial",
    "gaussian",
    "gaussian_sum",
    "integrate",
    "nlls_fit",
    "numeric_jacobian",
    "polyfit",
    "polyval",
    "quad",
]
