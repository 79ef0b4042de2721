"""Damped Gauss-Newton (Levenberg-Marquardt) fitting and polynomial least squares."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "FitProblem",
    "FitResult",
    "DegenerateFitError",
    "nlls_fit",
    "numeric_jacobian",
    "PolyFit",
    "fit_polynomial",
    "polyfit",
    "polyval",
]

_EPS = np.finfo(float).eps


class DegenerateFitError(np.linalg.LinAlgError):
    """Design matrix or normal equations are rank deficient."""


@dataclass
class FitProblem:
    """A weighted nonlinear least-squares problem.

    The objective is ``sum((weights * residual_fn(p)) ** 2)`` over the
    parameters not marked in ``frozen_mask``.  ``jacobian``, if given, returns
    d(residual)/d(params) for the full parameter vector (unweighted).
    ``x_scale`` sets the magnitude below which the finite-difference step stops
    shrinking; it defaults to 1.
    """

    residual_fn: Callable[[np.ndarray], np.ndarray]
    initial_params: Sequence[float]
    bounds: Optional[tuple] = None
    weights: Optional[Sequence[float]] = None
    frozen_mask: Optional[Sequence[bool]] = None
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    x_scale: Optional[Sequence[float]] = None
    absolute_sigma: bool = False

    def __post_init__(self):
        p0 = np.asarray(self.initial_params, dtype=float)
        self.initial_params = p0
        n = p0.size
        if self.frozen_mask is None:
            self.frozen_mask = np.zeros(n, dtype=bool)
        self.frozen_mask = np.asarray(self.frozen_mask, dtype=bool)
        if self.frozen_mask.shape != (n,):
            raise ValueError("frozen_mask length must match initial_params")
        if self.bounds is not None:
            lo, hi = self.bounds
            lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
            hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
            if np.any(lo > hi):
                raise ValueError("lower bound exceeds upper bound")
            if np.any((p0 < lo) | (p0 > hi)):
                raise ValueError("initial_params outside bounds")
            self.bounds = (lo, hi)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(~(w > 0)) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite and strictly positive")
            self.weights = w
        self.x_scale = (
            np.ones(n) if self.x_scale is None else np.asarray(self.x_scale, dtype=float)
        )


@dataclass
class FitResult:
    params: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    free_mask: np.ndarray
    degenerate: bool = False
    dof: int = 0
    message: str = ""
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def sigmas(self) -> np.ndarray:
        """1-sigma errors for every parameter; frozen ones get 0."""
        out = np.zeros(self.params.size)
        out[self.free_mask] = np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))
        return out

    @property
    def chi2(self) -> float:
        return float(self.residual_norm ** 2)

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else float("nan")


def numeric_jacobian(fun, p, f0=None, x_scale=None):
    """Forward-difference Jacobian with step sqrt(eps) * max(|p|, x_scale)."""
    p = np.asarray(p, dtype=float)
    f0 = fun(p) if f0 is None else f0
    scale = np.ones_like(p) if x_scale is None else x_scale
    J = np.empty((f0.size, p.size))
    for j in range(p.size):
        h = np.sqrt(_EPS) * max(abs(p[j]), scale[j])
        q = p.copy()
        q[j] += h
        h = q[j] - p[j]
        J[:, j] = (fun(q) - f0) / h
    return J


def nlls_fit(problem: FitProblem, max_iter=200, xtol=1e-10, ftol=1e-10, lam0=1e-3) -> FitResult:
    """Minimise the weighted residual norm with Levenberg-Marquardt damping.

    The damping factor is multiplied by 10 on a rejected step and divided by 10
    on an accepted one.  A step is accepted only if it lowers the weighted
    residual norm, so the returned parameters are the first best point found.
    Rank-deficient normal equations set ``degenerate`` instead of raising.
    """
    pr = problem
    free = ~pr.frozen_mask
    nfree = int(free.sum())
    full = pr.initial_params.copy()
    w = pr.weights

    def resid(pfree):
        q = full.copy()
        q[free] = pfree
        r = np.asarray(pr.residual_fn(q), dtype=float).ravel()
        if w is None:
            return r
        if w.size != r.size:
            raise ValueError("weights length does not match residual length")
        return r * w

    def jac(pfree, r):
        if pr.jacobian is not None:
            q = full.copy()
            q[free] = pfree
            J = np.asarray(pr.jacobian(q), dtype=float)[:, free]
            return J * w[:, None] if w is not None else J
        return numeric_jacobian(resid, pfree, r, pr.x_scale[free])

    def project(pfree):
        if pr.bounds is None:
            return pfree
        return np.clip(pfree, pr.bounds[0][free], pr.bounds[1][free])

    p = full[free].copy()
    r = resid(p)
    if not np.all(np.isfinite(r)):
        raise ValueError("residual function is not finite at the initial point")
    m = r.size
    cost = float(r @ r)
    lam = lam0
    converged = False
    message = "iteration limit reached"
    it = 0

    if nfree == 0:
        converged, message = True, "no free parameters"
    while not converged and it < max_iter:
        it += 1
        if cost == 0.0:
            converged, message = True, "zero residual"
            break
        J = jac(p, r)
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        diag[diag <= 0] = max(float(diag.max(initial=0.0)), 1.0) * _EPS
        accepted = False
        while lam < 1e20:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_new = project(p + step)
            r_new = resid(p_new)
            cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if cost_new < cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            converged, message = True, "no further decrease possible"
            break
        dp = p_new - p
        small_step = np.linalg.norm(dp) <= xtol * (np.linalg.norm(p) + xtol)
        small_change = (cost - cost_new) <= ftol * cost
        p, r, cost = p_new, r_new, cost_new
        lam = max(lam / 10.0, 1e-15)
        if small_step and small_change:
            converged, message = True, "relative step and residual change below tolerance"

    full[free] = p
    dof = m - nfree
    degenerate = False
    if nfree:
        J = jac(p, r)
        sv = np.linalg.svd(J, compute_uv=False)
        if sv.size < nfree or sv[-1] <= sv[0] * 1e-12 * max(m, nfree) or sv[0] == 0:
            degenerate = True
        A = J.T @ J
        cov = np.linalg.pinv(A) if degenerate else np.linalg.inv(A)
        if not pr.absolute_sigma:
            cov = cov * (cost / dof if dof > 0 else 1.0)
        cov = 0.5 * (cov + cov.T)
    else:
        cov = np.zeros((0, 0))
    if degenerate:
        message += "; normal equations are singular"
    return FitResult(
        params=full,
        covariance=cov,
        residual_norm=float(np.sqrt(cost)),
        converged=converged,
        iterations=it,
        free_mask=free,
        degenerate=degenerate,
        dof=dof,
        message=message,
        residuals=r,
    )


@dataclass(frozen=True)
class PolyFit:
    """Polynomial in the scaled variable ``u = (x - center) / scale``."""

    coef: np.ndarray
    center: float
    scale: float

    def __call__(self, x):
        return polyval(self.coef, (np.asarray(x, dtype=float) - self.center) / self.scale)

    @property
    def coefficients(self) -> np.ndarray:
        """Ascending coefficients in the raw variable ``x``."""
        deg = self.coef.size - 1
        out = np.zeros(deg + 1)
        # sum_k a_k s^-k (x - c)^k, expanded binomially
        from math import comb

        for k, a in enumerate(self.coef):
            ak = a / self.scale ** k
            for j in range(k + 1):
                out[j] += ak * comb(k, j) * (-self.center) ** (k - j)
        return out


def polyval(coef, x):
    """Evaluate ascending coefficients at ``x`` by Horner's rule."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for c in reversed(np.asarray(coef, dtype=float)):
        out = out * x + c
    return out


def fit_polynomial(x, y, degree, weights=None) -> PolyFit:
    """Least-squares polynomial on a centred, scaled abscissa."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if degree < 0 or degree >= x.size:
        raise DegenerateFitError(f"degree {degree} needs more than {x.size} points")
    center = 0.5 * (x.max() + x.min())
    scale = 0.5 * (x.max() - x.min()) or 1.0
    u = (x - center) / scale
    V = np.vander(u, degree + 1, increasing=True)
    rhs = y
    if weights is not None:
        wt = np.asarray(weights, dtype=float)
        V = V * wt[:, None]
        rhs = y * wt
    Q, R = np.linalg.qr(V)
    d = np.abs(np.diag(R))
    if d.min() <= d.max() * 1e-12 or np.unique(x).size <= degree:
        raise DegenerateFitError("polynomial design matrix is rank deficient")
    coef = np.linalg.solve(R, Q.T @ rhs)
    return PolyFit(coef, float(center), float(scale))


def polyfit(x, y, degree, weights=None) -> np.ndarray:
    """Ascending least-squares polynomial coefficients in ``x``."""
    return fit_polynomial(x, y, degree, weights).coefficients
