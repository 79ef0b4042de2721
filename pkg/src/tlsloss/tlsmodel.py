"""Forward model of TLS loss and frequency shift in a superconducting resonator.

Loss terms: resonant (saturable) TLS absorption, relaxation damping of
off-resonant TLS (power law and the full energy/relaxation-time double
integral), thermal quasiparticles, and a constant background.  Shifts: the
resonant digamma term and the relaxation double integral.

Microscopic prefactors (TLS density of states, dipole moment, permittivity)
are never separated; each mechanism carries a single dimensionless scale.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .constants import HBAR, KB, T_VALID_MAX
from .numerics import QuadratureError, QuadratureSpec, bessel_k0e, digamma, integrate
from .numerics.special import DomainError

__all__ = [
    "TlsParams",
    "RelaxKernelParams",
    "QpParams",
    "TemperatureRangeWarning",
    "SAMPLING_MOMENTS",
    "default_kernel",
    "unit_sphere_area",
    "q_res_inv",
    "q_rel_inv_powerlaw",
    "tau_min_inv",
    "q_rel_inv_full",
    "q_rel_inv_low_temperature",
    "q_rel_inv_high_temperature",
    "rel_scale_from_loss_tangent",
    "q_qp_inv",
    "q_total_inv",
    "dfrac_res",
    "dfrac_rel",
    "rel_sampling_integrand",
    "RelaxationCurve",
    "relaxation_curve",
]

# Integral of xi**d sech(xi)**2 coth(xi) over (0, inf) for d = 1, 2, 3,
# from two independent quadratures (tests/test_golden_constants.py).
SAMPLING_MOMENTS = {
    1: 1.2337005501361697,
    2: 1.0517997902646450,
    3: 1.5220170474062878,
}

# sech(xi)**2 < 1e-16 beyond this point
_XI_MAX = math.acosh(1e8)
_C_MAX = 1e150


class TemperatureRangeWarning(RuntimeWarning):
    """Temperature above the range where the one-phonon picture applies."""


def _warn_hot(T):
    if np.any(np.asarray(T) > T_VALID_MAX):
        warnings.warn(
            f"temperature above {T_VALID_MAX} K: relaxation model outside its validity range",
            TemperatureRangeWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class TlsParams:
    """TLS loss parameters for one resonator (prefactors already include F_SiN)."""

    f_tan_res: float
    n_c: float
    f_tan_rel: float
    t0: float = 0.5
    d: int = 2
    q_bg_inv: float = 0.0
    shift_res_scale: float = 0.0
    shift_rel_scale: float = 0.0

    def __post_init__(self):
        for name in ("f_tan_res", "f_tan_rel", "q_bg_inv"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.n_c > 0:
            raise ValueError("n_c must be > 0")
        if not self.t0 > 0:
            raise ValueError("t0 must be > 0")
        if self.d not in (1, 2, 3):
            raise ValueError("d must be 1, 2 or 3")


@dataclass(frozen=True)
class RelaxKernelParams:
    """One-phonon relaxation constants: elastic dipole (J), sound velocity (m/s),
    d-dimensional mass density (kg m^-d) and bath dimensionality."""

    gamma_bar: float
    v_bar: float
    rho_d: float
    d: int = 2

    def __post_init__(self):
        if not (self.gamma_bar > 0 and self.v_bar > 0 and self.rho_d > 0):
            raise ValueError("kernel constants must be strictly positive")
        if self.d not in (1, 2, 3):
            raise ValueError("d must be 1, 2 or 3")

    @property
    def rate_constant(self) -> float:
        """R in tau_min^-1 = R E^d coth(E / 2 k_B T) (units J^-d s^-1)."""
        d = self.d
        return (
            self.gamma_bar ** 2
            / self.v_bar ** (d + 2)
            * math.pi
            * unit_sphere_area(d)
            / (2.0 * math.pi) ** d
            / (HBAR ** (d + 1) * self.rho_d)
        )


@dataclass(frozen=True)
class QpParams:
    tc: float = 15.0
    alpha_kin: float = 1.0
    f0: float = 6e9
    gap_ratio: float = 1.76

    def __post_init__(self):
        if not self.tc > 0:
            raise ValueError("tc must be > 0")
        if not 0.0 <= self.alpha_kin <= 1.0:
            raise ValueError("alpha_kin must lie in [0, 1]")


# Bulk LPCVD SiN magnitudes; 100 nm film for the reduced densities.
_SIN_DENSITY = 3100.0
_FILM = 100e-9


def default_kernel(d: int = 2) -> RelaxKernelParams:
    """Representative SiN constants (1 eV elastic dipole, 7 km/s sound velocity)."""
    rho = {3: _SIN_DENSITY, 2: _SIN_DENSITY * _FILM, 1: _SIN_DENSITY * _FILM ** 2}[d]
    return RelaxKernelParams(gamma_bar=1.602176634e-19, v_bar=7000.0, rho_d=rho, d=d)


def unit_sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (2, 2*pi, 4*pi for d = 1, 2, 3)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def _coth(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    with np.errstate(divide="ignore"):
        out = np.where(small, 1.0 / np.where(small, x, 1.0) + x / 3.0, 1.0 / np.tanh(np.where(small, 1.0, x)))
    return out


def _omega(f0):
    return 2.0 * math.pi * f0


def q_res_inv(n, T, f0, p: TlsParams):
    """Resonant TLS loss: saturates with photon number and temperature."""
    n = np.asarray(n, dtype=float)
    T = np.asarray(T, dtype=float)
    x = HBAR * _omega(f0) / (2.0 * KB * T)
    out = p.f_tan_res * np.tanh(x) / np.sqrt(1.0 + n / p.n_c)
    return out[()] if out.ndim == 0 else out


def q_rel_inv_powerlaw(T, p: TlsParams):
    """Low-temperature relaxation loss, ``f_tan_rel * (T / t0)**d``."""
    T = np.asarray(T, dtype=float)
    out = p.f_tan_rel * (T / p.t0) ** p.d
    return out[()] if out.ndim == 0 else out


def tau_min_inv(E, T, k: RelaxKernelParams):
    """Fastest one-phonon relaxation rate of a TLS of energy E (rate at Delta0 = E)."""
    E = np.asarray(E, dtype=float)
    out = k.rate_constant * E ** k.d * _coth(E / (2.0 * KB * T))
    return out[()] if out.ndim == 0 else out


def _c_of_xi(xi, T, f0, k):
    E = 2.0 * KB * T * xi
    c = _omega(f0) / tau_min_inv(E, T, k)
    return np.minimum(c, _C_MAX)


def _inner_loss(c, rel_tol):
    """c * int_1^inf sqrt(1 - 1/y) / (1 + c^2 y^2) dy for an array of c."""
    c = np.atleast_1d(c)

    def f(y):
        root = np.sqrt(1.0 - 1.0 / y)
        return c[:, None] * root[None, :] / (1.0 + (c[:, None] * y[None, :]) ** 2)

    spec = QuadratureSpec(1.0, math.inf, rel_tol=rel_tol, singularity="sqrt-lower")
    return np.asarray(integrate(f, spec).value)


def _inner_shift(c, rel_tol):
    """int_1^inf sqrt(1 - 1/y) / (y (1 + c^2 y^2)) dy for an array of c."""
    c = np.atleast_1d(c)

    def f(y):
        root = np.sqrt(1.0 - 1.0 / y) / y
        return root[None, :] / (1.0 + (c[:, None] * y[None, :]) ** 2)

    spec = QuadratureSpec(1.0, math.inf, rel_tol=rel_tol, singularity="sqrt-lower")
    return np.asarray(integrate(f, spec).value)


def _energy_integral(inner, T, f0, k, rel_tol):
    """int_0^xi_max sech^2(xi) inner(c(xi)) d xi."""

    def outer(xi):
        c = _c_of_xi(xi, T, f0, k)
        return inner(c, rel_tol * 0.1) / np.cosh(xi) ** 2

    spec = QuadratureSpec(0.0, _XI_MAX, rel_tol=rel_tol)
    try:
        return integrate(outer, spec).value
    except QuadratureError as exc:
        raise QuadratureError(
            f"energy integral failed at T = {T!r} K over E in [0, {2 * KB * T * _XI_MAX:.3g}] J: {exc}",
            estimate=exc.estimate,
            error=exc.error,
            abscissa=exc.abscissa,
        ) from exc


def q_rel_inv_full(T, f0, scale, k: RelaxKernelParams, rel_tol=1e-9):
    """Relaxation loss from the full double integral over TLS energy and relaxation time.

    ``scale`` is the prefactor group P|p0|^2/(6 eps); the high-temperature
    limit of the result is ``pi * scale``.  Use :func:`rel_scale_from_loss_tangent`
    to express it through a loss tangent at a reference temperature.
    """
    if scale == 0:
        return 0.0 if np.ndim(T) == 0 else np.zeros(np.shape(T))
    _warn_hot(T)
    Ts = np.atleast_1d(np.asarray(T, dtype=float))
    if np.any(~(Ts > 0)):
        raise ValueError("T must be > 0")
    out = np.array([2.0 * scale * _energy_integral(_inner_loss, t, f0, k, rel_tol) for t in Ts])
    return float(out[0]) if np.ndim(T) == 0 else out.reshape(np.shape(T))


def q_rel_inv_low_temperature(T, f0, scale, k: RelaxKernelParams):
    """Long-lifetime asymptote (omega0 tau_min >> 1) of :func:`q_rel_inv_full`; scales as T^d."""
    T = np.asarray(T, dtype=float)
    w = _omega(f0)
    out = scale * 4.0 * k.rate_constant / (3.0 * w) * (2.0 * KB * T) ** k.d * SAMPLING_MOMENTS[k.d]
    return out[()] if out.ndim == 0 else out


def q_rel_inv_high_temperature(scale):
    """Fast-relaxation asymptote (omega0 tau_min << 1): temperature independent."""
    return math.pi * scale


def rel_scale_from_loss_tangent(f_tan_rel, t0, f0, k: RelaxKernelParams):
    """Scale for which the low-temperature asymptote equals ``f_tan_rel`` at ``t0``."""
    return f_tan_rel / q_rel_inv_low_temperature(t0, f0, 1.0, k)


def q_qp_inv(T, qp: QpParams):
    """Thermal-quasiparticle loss, alpha * sigma1/sigma2 in the low-T Mattis-Bardeen limit.

    sigma1/sigma_n = (4 Delta/hbar w) exp(-Delta/kT) sinh(xi) K0(xi) and
    sigma2/sigma_n = pi Delta / hbar w, with xi = hbar w / 2kT and
    Delta = gap_ratio * k_B * Tc.
    """
    Ts = np.asarray(T, dtype=float)
    if np.any(~(Ts > 0)) or np.any(Ts >= qp.tc / 2.0):
        raise DomainError(f"quasiparticle loss needs 0 < T < Tc/2 = {qp.tc / 2} K")
    if qp.alpha_kin == 0:
        return 0.0 if Ts.ndim == 0 else np.zeros(Ts.shape)
    gap = qp.gap_ratio * KB * qp.tc
    xi = HBAR * _omega(qp.f0) / (2.0 * KB * Ts)
    # sinh(xi) K0(xi) = (1 - exp(-2 xi)) / 2 * exp(xi) K0(xi)
    sinh_k0 = 0.5 * (-np.expm1(-2.0 * xi)) * bessel_k0e(xi)
    out = qp.alpha_kin * 4.0 / math.pi * np.exp(-gap / (KB * Ts)) * sinh_k0
    return float(out) if Ts.ndim == 0 else out


def q_total_inv(n, T_bp, f0, p: TlsParams, k: RelaxKernelParams, qp: Optional[QpParams] = None,
                heat=None, relaxation: str = "full"):
    """Total internal loss: background + resonant + relaxation + quasiparticle.

    ``heat`` is any object with ``heating(n)`` (e.g. ``inference.SelfHeatingLaw``);
    when given, every term is evaluated at T_bp + heating(n).  ``relaxation``
    selects ``"full"`` (tabulated double integral), ``"powerlaw"`` or ``"off"``.
    The quasiparticle term is evaluated at ``f0``.
    """
    n = np.asarray(n, dtype=float)
    T = np.asarray(T_bp, dtype=float) + (heat.heating(n) if heat is not None else 0.0)
    total = p.q_bg_inv + q_res_inv(n, T, f0, p)
    if relaxation == "full":
        if p.d != k.d:
            raise ValueError("TlsParams.d and RelaxKernelParams.d differ")
        total = total + relaxation_curve(f0, k).loss(T, p.f_tan_rel, p.t0)
    elif relaxation == "powerlaw":
        total = total + q_rel_inv_powerlaw(T, p)
    elif relaxation != "off":
        raise ValueError(f"unknown relaxation mode {relaxation!r}")
    if qp is not None:
        total = total + q_qp_inv(T, replace(qp, f0=f0))
    total = np.asarray(total)
    return total[()] if total.ndim == 0 else total


def dfrac_res(T, f0, p: TlsParams):
    """Resonant TLS fractional frequency shift (digamma form); vanishes as T -> 0."""
    T = np.asarray(T, dtype=float)
    y = HBAR * _omega(f0) / (2.0 * math.pi * KB * T)
    # 1/(2 pi i) = -i/(2 pi); Re psi is symmetric under conjugation
    bracket = np.real(digamma(0.5 - 1j * y)) - np.log(y)
    out = p.shift_res_scale * bracket
    return out[()] if np.ndim(out) == 0 else out


def dfrac_rel(T, f0, scale, k: RelaxKernelParams, rel_tol=1e-9):
    """Relaxation TLS fractional frequency shift (always <= 0).

    ``scale`` is the prefactor group P|p0|^2/(12 eps).
    """
    if scale == 0:
        return 0.0 if np.ndim(T) == 0 else np.zeros(np.shape(T))
    _warn_hot(T)
    Ts = np.atleast_1d(np.asarray(T, dtype=float))
    if np.any(~(Ts > 0)):
        raise ValueError("T must be > 0")
    out = np.array([-2.0 * scale * _energy_integral(_inner_shift, t, f0, k, rel_tol) for t in Ts])
    return float(out[0]) if np.ndim(T) == 0 else out.reshape(np.shape(T))


def rel_sampling_integrand(E, T, d: int):
    """xi^d sech^2(xi) coth(xi) with xi = E / 2k_BT: which TLS energies drive relaxation loss."""
    xi = np.asarray(E, dtype=float) / (2.0 * KB * np.asarray(T, dtype=float))
    # sech^2 coth = 2 / sinh(2 xi), written to stay finite for large xi
    with np.errstate(over="ignore"):
        out = xi ** d * 2.0 / np.sinh(2.0 * xi)
    out = np.where(np.isfinite(out), out, 0.0)
    return out[()] if out.ndim == 0 else out


class RelaxationCurve:
    """Tabulated relaxation loss and shift integrals for one (f0, kernel).

    Both double integrals are evaluated at unit scale on a log-spaced
    temperature grid and interpolated with cubic splines in log-log space;
    below the grid the low-temperature power laws take over.
    """

    def __init__(self, f0: float, k: RelaxKernelParams, t_min=2e-3, t_max=5.0, points=72, rel_tol=1e-10):
        self.f0 = float(f0)
        self.kernel = k
        self.t_min, self.t_max = t_min, t_max
        grid = np.geomspace(t_min, t_max, points)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TemperatureRangeWarning)
            loss = q_rel_inv_full(grid, f0, 1.0, k, rel_tol=rel_tol)
            shift = -dfrac_rel(grid, f0, 1.0, k, rel_tol=rel_tol)
        lg = np.log(grid)
        self._loss = CubicSpline(lg, np.log(loss))
        self._shift = CubicSpline(lg, np.log(shift))
        self._loss_edge = (loss[0], grid[0])
        self._shift_edge = (shift[0], grid[0])
        self.unit_low_t0 = None

    def _eval(self, spline, edge, power, T):
        T = np.asarray(T, dtype=float)
        if np.any(~(T > 0)):
            raise ValueError("T must be > 0")
        if np.any(T > self.t_max):
            raise ValueError(f"temperature above tabulated range ({self.t_max} K)")
        _warn_hot(T)
        v0, t_lo = edge
        inside = T >= t_lo
        out = np.where(inside, np.exp(spline(np.log(np.where(inside, T, t_lo)))),
                       v0 * (T / t_lo) ** power)
        return out[()] if out.ndim == 0 else out

    def unit_loss(self, T):
        """q_rel_inv_full at scale = 1."""
        return self._eval(self._loss, self._loss_edge, self.kernel.d, T)

    def unit_shift(self, T):
        """dfrac_rel at scale = 1."""
        return -self._eval(self._shift, self._shift_edge, 2 * self.kernel.d, T)

    def loss(self, T, f_tan_rel, t0):
        """Relaxation loss calibrated to equal ``f_tan_rel`` at ``t0`` in the low-T limit."""
        if f_tan_rel == 0:
            return np.zeros(np.shape(T))[()] if np.ndim(T) == 0 else np.zeros(np.shape(T))
        return rel_scale_from_loss_tangent(f_tan_rel, t0, self.f0, self.kernel) * self.unit_loss(T)


@lru_cache(maxsize=64)
def relaxation_curve(f0: float, k: RelaxKernelParams) -> RelaxationCurve:
    """Cached :class:`RelaxationCurve` for ``(f0, k)``."""
    return RelaxationCurve(float(f0), k)
