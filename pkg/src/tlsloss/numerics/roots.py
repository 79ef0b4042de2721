"""Bracketed scalar root finding (Brent's method)."""
from __future__ import annotations

import math

__all__ = ["BracketError", "find_root"]


class BracketError(ValueError):
    """The function does not change sign on the supplied bracket."""


def find_root(f, bracket, tol=1e-12, ftol=0.0, maxiter=200):
    """Return ``x`` in ``bracket`` with ``f(x) = 0``.

    Stops once the bracketing interval is narrower than ``tol`` (plus a few
    ulps of ``x``) or ``|f(x)| <= ftol``.  ``f(a) * f(b)`` must be <= 0.
    """
    a, b = float(bracket[0]), float(bracket[1])
    fa, fb = float(f(a)), float(f(b))
    if math.isnan(fa) or math.isnan(fb):
        raise ValueError("function is NaN at a bracket end")
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise BracketError(
            f"no sign change on [{a!r}, {b!r}]: f(a) = {fa!r}, f(b) = {fb!r}"
        )

    c, fc = a, fa
    d = e = b - a
    eps = 2.0 ** -52
    for _ in range(maxiter):
        if fb * fc > 0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * eps * abs(b) + 0.5 * tol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or abs(fb) <= ftol:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e = d
                d = p / q
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        a, fa = b, fb
        b += d if abs(d) > tol1 else math.copysign(tol1, xm)
        fb = float(f(b))
        if math.isnan(fb):
            raise ValueError(f"function is NaN at x = {b!r}")
    raise RuntimeError(f"find_root did not converge in {maxiter} iterations")
