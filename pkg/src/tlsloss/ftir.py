"""FT-IR post-processing: baseline removal, N-H / Si-H peak fits and atomic
hydrogen content from peak areas."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .numerics import DegenerateFitError, fit_gaussians, fit_polynomial, gaussian_sum
from .numerics.peaks import SQRT_2PI

__all__ = [
    "IrSpectrum",
    "PeakModel",
    "HydrogenResult",
    "NH_CENTER",
    "SIH_CENTER",
    "SIGMA_NH",
    "SIGMA_SIH",
    "MATRIX_DENSITY",
    "InsufficientBaseline",
    "peak_windows",
    "fit_baseline",
    "remove_baseline",
    "fit_peaks",
    "hydrogen_content",
    "analyze_spectrum",
    "synthetic_spectrum",
]

NH_CENTER = 3330.0
SIH_CENTER = 2210.0

# Lanford-Rand calibration, cm^2 per bond.
SIGMA_NH = 5.3e-18
SIGMA_SIH = 7.4e-18
# [Si] + [N] for stoichiometric Si3N4 at 3.1 g/cm^3, atoms/cm^3.
MATRIX_DENSITY = 9.3e22

WAVENUMBER_RANGE = (400.0, 7000.0)


class InsufficientBaseline(ValueError):
    pass


@dataclass(frozen=True)
class IrSpectrum:
    wavenumber: np.ndarray
    absorbance: np.ndarray
    thickness: float
    label: str = "other"

    def __post_init__(self):
        w = np.asarray(self.wavenumber, dtype=float)
        a = np.asarray(self.absorbance, dtype=float)
        object.__setattr__(self, "wavenumber", w)
        object.__setattr__(self, "absorbance", a)
        if w.ndim != 1 or w.shape != a.shape:
            raise ValueError("wavenumber and absorbance must be 1-D of equal length")
        if w.size < 2:
            raise ValueError("spectrum needs at least two points")
        dw = np.diff(w)
        if not (np.all(dw > 0) or np.all(dw < 0)):
            raise ValueError("wavenumber must be strictly monotone")
        if w.min() < WAVENUMBER_RANGE[0] or w.max() > WAVENUMBER_RANGE[1]:
            raise ValueError(f"wavenumber outside {WAVENUMBER_RANGE} cm^-1")
        if not np.all(np.isfinite(a)):
            raise ValueError("absorbance contains non-finite values")
        if not self.thickness > 0:
            raise ValueError("thickness must be > 0")


@dataclass
class PeakModel:
    """Gaussian absorption peak ``amplitude * exp(-(x-center)^2 / 2 sigma^2)``."""

    center: float
    sigma: float
    amplitude: float
    sigmas: dict = field(default_factory=dict)
    upper_limit: bool = False
    converged: bool = True
    message: str = ""
    seed: float = float("nan")

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("peak sigma must be > 0")

    @property
    def area(self) -> float:
        return self.amplitude * self.sigma * SQRT_2PI

    @property
    def area_sigma(self) -> float:
        return self.sigmas.get("area", 0.0)

    @property
    def area_bound(self) -> float:
        """Upper bound (area + 3 sigma) for peaks reported as limits."""
        return max(self.area, 0.0) + 3.0 * self.area_sigma

    def to_dict(self) -> dict:
        return {
            "seed_cm1": self.seed,
            "center_cm1": self.center,
            "sigma_cm1": self.sigma,
            "amplitude": self.amplitude,
            "area_cm1": self.area,
            "sigmas": dict(self.sigmas),
            "upper_limit": self.upper_limit,
            "area_bound_cm1": self.area_bound if self.upper_limit else None,
            "converged": self.converged,
            "message": self.message,
        }


@dataclass(frozen=True)
class HydrogenResult:
    n_sih: float
    n_nh: float
    atomic_h_percent: float
    sigmas: dict = field(default_factory=dict)
    upper_limit: bool = False

    def __post_init__(self):
        if self.n_sih < 0 or self.n_nh < 0:
            raise ValueError("bond densities must be >= 0")
        if not 0.0 <= self.atomic_h_percent < 100.0:
            raise ValueError("atomic_h_percent must lie in [0, 100)")

    def to_dict(self) -> dict:
        return {
            "n_sih_per_cm3": self.n_sih,
            "n_nh_per_cm3": self.n_nh,
            "atomic_h_percent": self.atomic_h_percent,
            "sigmas": dict(self.sigmas),
            "upper_limit": self.upper_limit,
        }


def peak_windows(seeds=(NH_CENTER, SIH_CENTER), half_width=300.0):
    return [(c - half_width, c + half_width) for c in seeds]


def _in_windows(w, windows):
    m = np.zeros(w.shape, dtype=bool)
    for lo, hi in windows:
        m |= (w >= min(lo, hi)) & (w <= max(lo, hi))
    return m


def fit_baseline(s: IrSpectrum, degree=3, exclusion_windows=None, mask_windows=()):
    """Polynomial fitted to the points outside the exclusion (and notch) windows."""
    if exclusion_windows is None:
        exclusion_windows = peak_windows()
    keep = ~_in_windows(s.wavenumber, list(exclusion_windows) + list(mask_windows))
    if keep.sum() < degree + 2:
        raise InsufficientBaseline(
            f"{keep.sum()} baseline points left for a degree-{degree} polynomial (need {degree + 2})"
        )
    try:
        return fit_polynomial(s.wavenumber[keep], s.absorbance[keep], degree)
    except DegenerateFitError as exc:
        raise InsufficientBaseline(str(exc)) from exc


def remove_baseline(s: IrSpectrum, degree=3, exclusion_windows=None, mask_windows=()) -> IrSpectrum:
    """Subtract a polynomial baseline fitted away from the peak regions.

    Windows default to the N-H and Si-H seeds +- 300 cm^-1.  ``mask_windows``
    drops residual atmospheric lines from the fit as well.
    """
    poly = fit_baseline(s, degree, exclusion_windows, mask_windows)
    return replace(s, absorbance=s.absorbance - poly(s.wavenumber))


def _local_noise(y):
    if y.size < 4:
        return 0.0
    d2 = np.diff(y, 2)
    # robust scale of second differences; var(d2) = 6 sigma^2 for white noise
    mad = np.median(np.abs(d2 - np.median(d2)))
    return float(1.4826 * mad / math.sqrt(6.0))


def _linear_amplitudes(x, y, centers, widths, noise):
    G = np.stack([np.exp(-0.5 * ((x - c) / w) ** 2) for c, w in zip(centers, widths)], axis=1)
    amp, *_ = np.linalg.lstsq(G, y, rcond=None)
    try:
        cov = np.linalg.inv(G.T @ G)
    except np.linalg.LinAlgError:
        cov = np.full((len(centers),) * 2, np.inf)
    return amp, noise * np.sqrt(np.clip(np.diag(cov), 0.0, None))


def fit_peaks(s: IrSpectrum, seeds: Sequence[float] = (NH_CENTER, SIH_CENTER), window=300.0,
              width_guess=60.0, threshold=3.0, mask_windows=()) -> list[PeakModel]:
    """Simultaneous Gaussian fit near each seed on a baseline-corrected spectrum.

    Amplitudes are first found by linear least squares with centers at the
    seeds.  A peak whose amplitude does not exceed ``threshold`` times the
    local noise is reported as an upper limit from that linear fit.  The rest
    are refined together; if the joint fit fails, each peak is refitted alone
    so one failure does not take the others down.
    """
    w = s.wavenumber
    y = s.absorbance
    windows = peak_windows(seeds, window)
    use = _in_windows(w, windows) & ~_in_windows(w, mask_windows)
    x, yy = w[use], y[use]
    noise = []
    for lo, hi in windows:
        m = _in_windows(w, [(lo, hi)]) & ~_in_windows(w, mask_windows)
        noise.append(_local_noise(y[m]))
    noise_all = max(noise) if noise else 0.0
    amp, amp_sig = _linear_amplitudes(x, yy, seeds, [width_guess] * len(seeds), noise_all)

    peaks: list[Optional[PeakModel]] = [None] * len(seeds)
    strong = []
    for i, c in enumerate(seeds):
        if amp[i] <= threshold * noise[i]:
            a_sig = float(amp_sig[i])
            peaks[i] = PeakModel(
                float(c), float(width_guess), float(amp[i]),
                {"amplitude": a_sig, "area": a_sig * width_guess * SQRT_2PI, "center": 0.0, "sigma": 0.0},
                upper_limit=True, message="amplitude below detection threshold", seed=float(c),
            )
        else:
            strong.append(i)

    def build(idx, res):
        out = []
        p = res.params.reshape(-1, 3)
        sg = res.sigmas.reshape(-1, 3)
        cov = res.covariance
        for j, i in enumerate(idx):
            a, c, sw = p[j]
            sa, sc, ss = sg[j]
            # d(area) = sqrt(2 pi) (sigma da + a dsigma), with the a-sigma covariance
            ia, isg = 3 * j, 3 * j + 2
            var = sw ** 2 * cov[ia, ia] + a ** 2 * cov[isg, isg] + 2 * a * sw * cov[ia, isg]
            out.append(PeakModel(
                float(c), float(abs(sw)), float(a),
                {"amplitude": float(sa), "center": float(sc), "sigma": float(ss),
                 "area": float(SQRT_2PI * math.sqrt(max(var, 0.0)))},
                converged=bool(res.converged), message=res.message, seed=float(seeds[i]),
            ))
        return out

    if strong:
        init = [(amp[i], seeds[i], width_guess) for i in strong]
        res = fit_gaussians(x, yy, init, max_iter=400)
        ok = res.converged and np.all(np.isfinite(res.params))
        if ok:
            for i, pk in zip(strong, build(strong, res)):
                peaks[i] = pk
        else:
            for i in strong:
                m = _in_windows(x, [windows[i]])
                r1 = fit_gaussians(x[m], yy[m], [(amp[i], seeds[i], width_guess)], max_iter=400)
                peaks[i] = build([i], r1)[0]
    return peaks


def hydrogen_content(sih: PeakModel, nh: PeakModel, thickness: float,
                     cross_sections: Mapping[str, float] | None = None,
                     matrix_density: float = MATRIX_DENSITY) -> HydrogenResult:
    """Bond densities A / (sigma t) and atomic hydrogen percentage.

    ``cross_sections`` maps ``"SiH"`` and ``"NH"`` to cm^2 per bond.  Peak areas
    are in absorbance * cm^-1 and ``thickness`` in cm.  Negative areas (upper
    limits fluctuating below zero) are clipped to zero.
    """
    cs = {"SiH": SIGMA_SIH, "NH": SIGMA_NH}
    if cross_sections:
        cs.update(cross_sections)
    if not thickness > 0:
        raise ValueError("thickness must be > 0")
    if not (cs["SiH"] > 0 and cs["NH"] > 0):
        raise ValueError("cross sections must be > 0")
    if not matrix_density > 0:
        raise ValueError("matrix_density must be > 0")
    n_sih = max(sih.area, 0.0) / (cs["SiH"] * thickness)
    n_nh = max(nh.area, 0.0) / (cs["NH"] * thickness)
    s_sih = sih.area_sigma / (cs["SiH"] * thickness)
    s_nh = nh.area_sigma / (cs["NH"] * thickness)
    h = n_sih + n_nh
    total = matrix_density + h
    pct = 100.0 * h / total
    dpct = 100.0 * matrix_density / total ** 2  # same partial for both densities
    s_pct = dpct * math.hypot(s_sih, s_nh)
    return HydrogenResult(
        n_sih, n_nh, pct,
        {"n_sih": s_sih, "n_nh": s_nh, "atomic_h_percent": s_pct},
        upper_limit=bool(sih.upper_limit and nh.upper_limit),
    )


def analyze_spectrum(s: IrSpectrum, degree=3, seeds=(SIH_CENTER, NH_CENTER), window=300.0,
                     cross_sections=None, matrix_density=MATRIX_DENSITY, mask_windows=()):
    """Baseline removal, peak fits and hydrogen content in one call.

    Returns ``(corrected_spectrum, {"SiH": peak, "NH": peak}, HydrogenResult)``.
    The first seed is taken as Si-H and the second as N-H.
    """
    corrected = remove_baseline(s, degree, peak_windows(seeds, window), mask_windows)
    sih, nh = fit_peaks(corrected, seeds, window, mask_windows=mask_windows)
    return corrected, {"SiH": sih, "NH": nh}, hydrogen_content(sih, nh, s.thickness, cross_sections, matrix_density)


def synthetic_spectrum(peaks: Sequence[tuple], thickness: float, label="other",
                       wavenumber=None, baseline=(0.0,), noise=0.0, seed=0) -> IrSpectrum:
    """Gaussian peaks ``(area, center, sigma)`` on a polynomial baseline.

    ``baseline`` holds ascending coefficients in ``(w - 2000) / 1000``.  White
    noise of standard deviation ``noise`` is added from a seeded generator.
    """
    w = np.arange(1000.0, 4000.0 + 1e-9, 2.0) if wavenumber is None else np.asarray(wavenumber, float)
    flat = []
    for area, c, sw in peaks:
        flat += [area / (sw * SQRT_2PI), c, sw]
    y = gaussian_sum(w, flat) if flat else np.zeros_like(w)
    u = (w - 2000.0) / 1000.0
    y = y + np.polynomial.polynomial.polyval(u, np.asarray(baseline, float))
    if noise > 0:
        y = y + noise * np.random.default_rng(seed).standard_normal(w.size)
    return IrSpectrum(w, y, thickness, label)
