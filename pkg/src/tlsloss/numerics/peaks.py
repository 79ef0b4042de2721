"""Gaussian line shapes and simultaneous multi-peak fitting."""
from __future__ import annotations

import numpy as np

from .lsq import FitProblem, FitResult, nlls_fit

__all__ = ["gaussian", "gaussian_sum", "fit_gaussians", "SQRT_2PI"]

SQRT_2PI = float(np.sqrt(2.0 * np.pi))


def gaussian(x, amplitude, center, sigma):
    return amplitude * np.exp(-0.5 * ((x - center) / sigma) ** 2)


def gaussian_sum(x, params):
    """Sum of Gaussians; ``params`` is flat ``(amp, center, sigma) * k``."""
    params = np.asarray(params, dtype=float).reshape(-1, 3)
    out = np.zeros_like(np.asarray(x, dtype=float))
    for amp, c, s in params:
        out = out + gaussian(x, amp, c, s)
    return out


def _gaussian_jacobian(x, params):
    params = np.asarray(params, dtype=float).reshape(-1, 3)
    J = np.empty((x.size, params.size))
    for k, (amp, c, s) in enumerate(params):
        z = (x - c) / s
        e = np.exp(-0.5 * z * z)
        J[:, 3 * k] = e
        J[:, 3 * k + 1] = amp * e * z / s
        J[:, 3 * k + 2] = amp * e * z * z / s
    return J


def fit_gaussians(x, y, init, frozen=None, weights=None, **kw) -> FitResult:
    """Fit a sum of Gaussians to ``y(x)``.

    ``init`` is a sequence of ``(amplitude, center, sigma)`` triples; ``frozen``
    an optional boolean mask of the same flattened length.  Widths are kept
    positive through a lower bound.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p0 = np.asarray(init, dtype=float).ravel()
    k = p0.size // 3
    lo = np.tile([-np.inf, -np.inf, 1e-12], k)
    hi = np.full(p0.size, np.inf)
    scale = np.tile([max(np.abs(y).max(), 1e-300), 1.0, 1.0], k)
    problem = FitProblem(
        residual_fn=lambda p: gaussian_sum(x, p) - y,
        initial_params=p0,
        bounds=(lo, hi),
        weights=weights,
        frozen_mask=frozen,
        jacobian=lambda p: _gaussian_jacobian(x, p),
        x_scale=scale,
    )
    return nlls_fit(problem, **kw)
