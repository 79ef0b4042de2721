"""Resonator transmission model, normalisation, fitting and photon-number calibration.

The line shape is the notch-type response with a complex coupling quality
factor,

    S21(f) = 1 - (Q |Qe^-1| e^{i phi}) / (1 + 2 i Q (f - f0) / f0),

fitted in frequency units (Hz) with stacked real/imaginary residuals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .constants import HBAR
from .numerics import FitProblem, nlls_fit

__all__ = [
    "FrequencySweep",
    "ResonatorParams",
    "NoiseSpec",
    "ResonanceNotFound",
    "SweepTooNarrow",
    "FitFailed",
    "s21_model",
    "normalize_sweep",
    "fit_s21",
    "photon_number",
    "incident_power_for",
    "synth_sweep",
    "default_grid",
    "linewidth",
]


class ResonanceNotFound(ValueError):
    """No dip deeper than the noise floor."""


class SweepTooNarrow(ValueError):
    """Not enough off-resonance points to estimate the baseline."""


class FitFailed(RuntimeError):
    """The S21 fit did not converge."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class FrequencySweep:
    freqs: np.ndarray
    s21: np.ndarray
    drive_power_incident: float = 0.0
    drive_detuning: float = 1.5e6
    base_temp: float = 0.01
    device_id: str = ""

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        s = np.asarray(self.s21, dtype=complex)
        if f.ndim != 1 or f.shape != s.shape:
            raise ValueError("freqs and s21 must be 1-D and equal length")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise ValueError("freqs must be strictly increasing")
        if not np.all(np.isfinite(np.abs(s))):
            raise ValueError("s21 must be finite")
        if self.drive_power_incident < 0:
            raise ValueError("drive_power_incident must be >= 0")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "s21", s)


@dataclass(frozen=True)
class ResonatorParams:
    """Centre frequency (Hz), total loss Q^-1, coupling |Qe^-1| and its phase phi.

    The internal loss is derived, ``q_int_inv = q_total_inv - q_ext_inv_mag * cos(phi)``.
    """

    f0: float
    q_total_inv: float
    q_ext_inv_mag: float
    phi: float = 0.0
    sigmas: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.f0 > 0 and self.q_total_inv > 0 and self.q_ext_inv_mag > 0):
            raise ValueError("f0, q_total_inv and q_ext_inv_mag must be > 0")

    @property
    def q_int_inv(self) -> float:
        return self.q_total_inv - self.q_ext_inv_mag * math.cos(self.phi)

    @classmethod
    def from_internal(cls, f0, q_int_inv, q_ext_inv_mag, phi=0.0):
        return cls(f0, q_int_inv + q_ext_inv_mag * math.cos(phi), q_ext_inv_mag, phi)

    def to_dict(self) -> dict:
        s = dict(self.sigmas)
        if "q_int_inv" not in s and {"q_total_inv", "q_ext_inv_mag", "phi"} <= s.keys():
            s["q_int_inv"] = math.hypot(
                s["q_total_inv"],
                math.hypot(s["q_ext_inv_mag"] * math.cos(self.phi),
                           self.q_ext_inv_mag * math.sin(self.phi) * s["phi"]),
            )
        return {
            "f0_hz": self.f0,
            "q_total_inv": self.q_total_inv,
            "q_ext_inv_mag": self.q_ext_inv_mag,
            "phi_rad": self.phi,
            "q_int_inv": self.q_int_inv,
            "sigmas": {_SIGMA_KEYS.get(k, k): v for k, v in s.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResonatorParams":
        inv = {v: k for k, v in _SIGMA_KEYS.items()}
        # q_int_inv's sigma is derived in to_dict, not stored
        sig = {inv.get(k, k): float(v) for k, v in d.get("sigmas", {}).items() if k != "q_int_inv"}
        return cls(float(d["f0_hz"]), float(d["q_total_inv"]), float(d["q_ext_inv_mag"]),
                   float(d.get("phi_rad", 0.0)), sig)


_SIGMA_KEYS = {"f0": "f0_hz", "phi": "phi_rad"}


@dataclass(frozen=True)
class NoiseSpec:
    sigma_iq: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_iq < 0:
            raise ValueError("sigma_iq must be >= 0")


def linewidth(p: ResonatorParams) -> float:
    """Full width at half depth in Hz, f0 * Q^-1."""
    return p.f0 * p.q_total_inv


def s21_model(f, p: ResonatorParams):
    f = np.asarray(f, dtype=float)
    x = (f - p.f0) / p.f0
    out = 1.0 - (p.q_ext_inv_mag / p.q_total_inv) * np.exp(1j * p.phi) / (1.0 + 2j * x / p.q_total_inv)
    return out[()] if out.ndim == 0 else out


def default_grid(p: ResonatorParams, span_linewidths=20.0, points=401) -> np.ndarray:
    half = 0.5 * span_linewidths * linewidth(p)
    return np.linspace(p.f0 - half, p.f0 + half, points)


def synth_sweep(p: ResonatorParams, grid=None, noise: NoiseSpec = NoiseSpec(), *,
                drive_power_incident=0.0, drive_detuning=1.5e6, base_temp=0.01, device_id="") -> FrequencySweep:
    """Model S21 on ``grid`` plus i.i.d. Gaussian noise on each quadrature."""
    grid = default_grid(p) if grid is None else np.asarray(grid, dtype=float)
    s = s21_model(grid, p)
    if noise.sigma_iq > 0:
        rng = np.random.default_rng(noise.seed)
        z = rng.standard_normal((2, grid.size))
        s = s + noise.sigma_iq * (z[0] + 1j * z[1])
    return FrequencySweep(grid, s, drive_power_incident, drive_detuning, base_temp, device_id)


def photon_number(p: ResonatorParams, P_inc, detuning):
    """Mean intracavity photon number for incident power ``P_inc`` (W) at drive detuning (Hz)."""
    P_inc = np.asarray(P_inc, dtype=float)
    if np.any(P_inc < 0):
        raise ValueError("P_inc must be >= 0")
    w0 = 2.0 * math.pi * p.f0
    dp = 2.0 * math.pi * np.asarray(detuning, dtype=float)
    out = P_inc / (HBAR * w0 ** 2) * (0.5 * p.q_ext_inv_mag) / ((0.5 * p.q_total_inv) ** 2 + (dp / w0) ** 2)
    return out[()] if np.ndim(out) == 0 else out


def incident_power_for(p: ResonatorParams, n_bar, detuning):
    """Incident power giving ``n_bar`` photons; inverse of :func:`photon_number`."""
    return np.asarray(n_bar, dtype=float) / photon_number(p, 1.0, detuning)


# ---------------------------------------------------------------- fitting

def _initial_guess(f, s) -> ResonatorParams:
    mag2 = np.abs(s) ** 2
    i_min = int(np.argmin(mag2))
    f0 = float(f[i_min])
    depth = 1.0 - math.sqrt(mag2[i_min])
    level = 0.5 * (1.0 + mag2[i_min])
    below = mag2 < level
    # contiguous run of points under half depth around the minimum
    lo = i_min
    while lo > 0 and below[lo - 1]:
        lo -= 1
    hi = i_min
    while hi < f.size - 1 and below[hi + 1]:
        hi += 1

    def cross(i, j):
        # linear interpolation of the half-depth crossing between points i and j
        if mag2[j] == mag2[i]:
            return f[i]
        return f[i] + (level - mag2[i]) * (f[j] - f[i]) / (mag2[j] - mag2[i])

    f_lo = cross(lo - 1, lo) if lo > 0 else f[0]
    f_hi = cross(hi, hi + 1) if hi < f.size - 1 else f[-1]
    width = max(f_hi - f_lo, 2.0 * np.median(np.diff(f)))
    qt = width / f0
    qe = max(depth, 1e-6) * qt
    return ResonatorParams(f0, qt, qe, 0.0)


def _noise_estimate(s) -> float:
    # per-quadrature noise from second differences (insensitive to smooth structure)
    d2 = s[2:] - 2 * s[1:-1] + s[:-2]
    return float(np.sqrt(np.mean(np.abs(d2) ** 2) / 12.0)) if s.size > 3 else 0.0


def _model_and_jac(f, fref, q):
    """S21 and its derivatives with respect to (df0 [units of fref], qt, qe, phi)."""
    df0, qt, qe, phi = q
    f0 = fref * (1.0 + df0)
    x = (f - f0) / f0
    e = np.exp(1j * phi)
    den = 1.0 + 2j * x / qt
    core = (qe / qt) * e / den
    s = 1.0 - core
    dx_df0 = -f / f0 ** 2 * fref
    dden_dx = 2j / qt
    ds_dden = core / den
    J = np.empty((f.size, 4), dtype=complex)
    J[:, 0] = ds_dden * dden_dx * dx_df0
    # d/dqt: core = qe e / (qt + 2i x) -> -d core = qe e / (qt + 2ix)^2
    J[:, 1] = qe * e / (qt + 2j * x) ** 2
    J[:, 2] = -e / (qt + 2j * x)
    J[:, 3] = -1j * core
    return s, J


def fit_s21(sweep: FrequencySweep, init: Optional[ResonatorParams] = None, *, max_iter=200) -> ResonatorParams:
    """Least-squares fit of the line shape to a normalised sweep.

    Without ``init`` the centre is taken from the deepest point, Q^-1 from the
    full width at half depth of |S21|^2 and |Qe^-1| from the depth, phi = 0.
    """
    f, s = sweep.freqs, sweep.s21
    noise = _noise_estimate(s)
    depth = 1.0 - float(np.min(np.abs(s)))
    if depth <= 5.0 * noise or depth <= 0:
        raise ResonanceNotFound(f"dip depth {depth:.3g} not above 5x noise ({noise:.3g})")
    p0 = init if init is not None else _initial_guess(f, s)
    fref = p0.f0

    def resid(q):
        m, _ = _model_and_jac(f, fref, q)
        r = m - s
        return np.concatenate([r.real, r.imag])

    def jac(q):
        _, J = _model_and_jac(f, fref, q)
        return np.vstack([J.real, J.imag])

    q0 = np.array([0.0, p0.q_total_inv, p0.q_ext_inv_mag, p0.phi])
    lo = np.array([-np.inf, 0.0, 0.0, -math.pi])
    hi = np.array([np.inf, np.inf, np.inf, math.pi])
    q0 = np.clip(q0, lo, hi)
    res = nlls_fit(FitProblem(resid, q0, bounds=(lo, hi), jacobian=jac), max_iter=max_iter)
    if not res.converged:
        raise FitFailed(f"S21 fit did not converge: {res.message}", res)
    df0, qt, qe, phi = res.params
    sig = res.sigmas
    if qt <= 0 or qe <= 0:
        raise FitFailed("fit returned non-positive quality factors", res)
    return ResonatorParams(
        f0=float(fref * (1.0 + df0)),
        q_total_inv=float(qt),
        q_ext_inv_mag=float(qe),
        phi=float(phi),
        sigmas={"f0": float(fref * sig[0]), "q_total_inv": float(sig[1]),
                "q_ext_inv_mag": float(sig[2]), "phi": float(sig[3])},
    )


# ---------------------------------------------------------------- baseline

def _edge_baseline(f, s, fraction):
    n = s.size
    k = int(math.floor(fraction * n))
    if k < 3:
        raise SweepTooNarrow(f"edge window of {k} points per side; need >= 3")
    idx = np.r_[0:k, n - k:n]
    fc = 0.5 * (f[0] + f[-1])
    x = (f[idx] - fc) / (f[-1] - f[0])
    amp = np.polyfit(x, np.abs(s[idx]), 1)
    ph = np.unwrap(np.angle(s))
    phase = np.polyfit(x, ph[idx], 1)
    return fc, amp, phase


def _baseline(f, fc, span, amp, phase):
    x = (f - fc) / span
    return (amp[0] * x + amp[1]) * np.exp(1j * (phase[0] * x + phase[1]))


def normalize_sweep(sweep: FrequencySweep, edge_fraction=0.1, refine=True) -> FrequencySweep:
    """Divide out a complex baseline with linear amplitude and linear phase.

    The baseline is first estimated from the outer ``edge_fraction`` of points
    on each side.  With ``refine`` the baseline is then fitted jointly with the
    resonance, which removes the bias from the Lorentzian tails that still
    reach into the edge windows.
    """
    f, s = sweep.freqs, sweep.s21
    span = f[-1] - f[0]
    fc, amp, phase = _edge_baseline(f, s, edge_fraction)
    base = _baseline(f, fc, span, amp, phase)
    s1 = s / base
    if refine:
        guess = _initial_guess(f, s1)
        if (f[-1] - f[0]) < 4.0 * linewidth(guess):
            raise SweepTooNarrow("sweep spans fewer than ~4 linewidths")
        fref = guess.f0
        x = (f - fc) / span

        def full(q):
            m, _ = _model_and_jac(f, fref, q[:4])
            b = (1.0 + q[4] + q[5] * x) * np.exp(1j * (q[6] + q[7] * x))
            return m * b

        def resid(q):
            r = full(q) - s1
            return np.concatenate([r.real, r.imag])

        def jac(q):
            m, J = _model_and_jac(f, fref, q[:4])
            amp_ = 1.0 + q[4] + q[5] * x
            ph = np.exp(1j * (q[6] + q[7] * x))
            b = amp_ * ph
            Jc = np.empty((f.size, 8), dtype=complex)
            Jc[:, :4] = J * b[:, None]
            Jc[:, 4] = m * ph
            Jc[:, 5] = m * ph * x
            Jc[:, 6] = 1j * m * b
            Jc[:, 7] = 1j * m * b * x
            return np.vstack([Jc.real, Jc.imag])

        q0 = np.array([0.0, guess.q_total_inv, guess.q_ext_inv_mag, 0.0, 0.0, 0.0, 0.0, 0.0])
        res = nlls_fit(FitProblem(resid, q0, jacobian=jac), max_iter=300)
        q = res.params
        if res.converged and q[1] > 0 and q[2] > 0:
            s1 = s1 / ((1.0 + q[4] + q[5] * x) * np.exp(1j * (q[6] + q[7] * x)))
    return replace(sweep, s21=s1)
