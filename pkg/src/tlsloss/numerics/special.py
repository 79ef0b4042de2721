"""Digamma of complex argument and the modified Bessel function K0."""
from __future__ import annotations

import math

import numpy as np

__all__ = ["DomainError", "digamma", "bessel_k0", "bessel_k0e", "EULER_GAMMA"]

EULER_GAMMA = 0.57721566490153286060651209008240243

# B_{2k} / (2k) for k = 1..8
_ASYMPTOTIC = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
)
_SHIFT_TO = 10.0


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _digamma_right(z: np.ndarray) -> np.ndarray:
    # Recurrence psi(z) = psi(z + 1) - 1/z until Re z > 10.
    acc = np.zeros_like(z)
    z = z.copy()
    need = z.real <= _SHIFT_TO
    while need.any():
        acc[need] -= 1.0 / z[need]
        z[need] += 1.0
        need = z.real <= _SHIFT_TO
    w = 1.0 / (z * z)
    series = np.zeros_like(z)
    for c in reversed(_ASYMPTOTIC):
        series = (series + c) * w
    return acc + np.log(z) - 0.5 / z - series


def digamma(z):
    """Digamma function for real or complex ``z`` (scalar or array).

    Non-positive integers are poles and raise :class:`DomainError`.
    """
    arr = np.asarray(z, dtype=complex)
    pole = (arr.imag == 0) & (arr.real <= 0) & (arr.real == np.round(arr.real))
    if pole.any():
        raise DomainError(f"digamma has a pole at {arr[pole].ravel()[0].real!r}")
    flat = arr.ravel()
    out = np.empty_like(flat)
    left = flat.real < 0
    if (~left).any():
        out[~left] = _digamma_right(flat[~left])
    if left.any():
        # reflection: psi(z) = psi(1 - z) - pi cot(pi z)
        zl = flat[left]
        out[left] = _digamma_right(1.0 - zl) - np.pi / np.tan(np.pi * zl)
    out = out.reshape(arr.shape)
    if np.ndim(z) == 0:
        return complex(out)
    return out


def _k0e_scalar(x: float) -> float:
    """exp(x) * K0(x) for x > 0."""
    if x <= 2.0:
        q = 0.25 * x * x
        term = 1.0
        i0 = 1.0
        tail = 0.0
        harmonic = 0.0
        k = 0
        while True:
            k += 1
            term *= q / (k * k)
            harmonic += 1.0 / k
            i0 += term
            tail += term * harmonic
            if term * max(harmonic, 1.0) < 1e-17 * max(abs(tail), i0):
                break
        k0 = -(math.log(0.5 * x) + EULER_GAMMA) * i0 + tail
        return k0 * math.exp(x)
    # Steed's continued fraction (Temme's method, order zero).
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 100000):
        a -= 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < 1e-17:
            break
    return math.sqrt(math.pi / (2.0 * x)) / s


def bessel_k0e(x):
    """Exponentially scaled modified Bessel function ``exp(x) * K0(x)``."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("K0 requires x > 0")
    out = np.vectorize(_k0e_scalar, otypes=[float])(arr)
    return float(out) if np.ndim(x) == 0 else out


def bessel_k0(x):
    """Modified Bessel function of the second kind, order zero, for x > 0.

    Power series for x <= 2, Steed's continued fraction above.  Beyond
    x ~ 745 the result underflows to 0.
    """
    arr = np.asarray(x, dtype=float)
    out = bessel_k0e(arr) * np.exp(-arr)
    return float(out) if np.ndim(x) == 0 else out
