"""Inverse analyses: joint TLS loss fits, effective-temperature thermometry,
self-heating power laws, and the drive-detuning convergence loop."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .constants import HBAR, KB
from .numerics import FitProblem, FitResult, find_root, nlls_fit
from .response import ResonatorParams, photon_number
from .tlsmodel import (
    QpParams,
    RelaxKernelParams,
    TemperatureRangeWarning,
    TlsParams,
    default_kernel,
    dfrac_res,
    q_qp_inv,
    relaxation_curve,
    rel_scale_from_loss_tangent,
)

__all__ = [
    "LossPoint",
    "LossDataset",
    "SelfHeatingLaw",
    "SelfHeatingCurve",
    "LossFitConfig",
    "FilmParams",
    "LossModel",
    "LossFit",
    "OutOfRange",
    "DetuningNotConverged",
    "fit_loss_model",
    "fit_device_models",
    "infer_effective_temperature",
    "thermometry",
    "fit_self_heating",
    "DetuningModel",
    "DetuningResult",
    "converge_detuning",
]


# ---------------------------------------------------------------- data types

@dataclass(frozen=True)
class LossPoint:
    n_bar: float
    t_bp: float
    q_int_inv: float
    sigma: float
    device_id: str
    f_sin: float
    f0: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if self.n_bar < 0:
            raise ValueError("n_bar must be >= 0")
        if not 0.0 <= self.f_sin <= 1.0:
            raise ValueError("f_sin must lie in [0, 1]")


@dataclass
class LossDataset:
    points: list
    sweep_kind: str = "power"

    def __post_init__(self):
        if self.sweep_kind not in ("power", "temperature"):
            raise ValueError("sweep_kind must be 'power' or 'temperature'")
        self.points = list(self.points)

    def __len__(self):
        return len(self.points)

    def column(self, name) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])

    def devices(self) -> list[str]:
        seen = []
        for p in self.points:
            if p.device_id not in seen:
                seen.append(p.device_id)
        return seen

    def for_device(self, device_id) -> "LossDataset":
        return LossDataset([p for p in self.points if p.device_id == device_id], self.sweep_kind)


@dataclass(frozen=True)
class SelfHeatingLaw:
    """T_eff(n) = t_bp + a_coeff * n**beta."""

    a_coeff: float
    beta: float = 0.5
    t_bp: float = 0.01
    sigma_a: float = 0.0
    sigma_beta: float = 0.0
    low_confidence: bool = False
    per_device_a: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.a_coeff < 0:
            raise ValueError("a_coeff must be >= 0")
        if not 0.0 < self.beta < 2.0:
            raise ValueError("beta must lie in (0, 2)")

    def heating(self, n):
        return self.a_coeff * np.asarray(n, dtype=float) ** self.beta

    def effective_temperature(self, n, t_bp=None):
        return (self.t_bp if t_bp is None else t_bp) + self.heating(n)


@dataclass
class SelfHeatingCurve:
    """Inferred effective temperatures of one device versus photon number."""

    n_bar: np.ndarray
    t_eff: np.ndarray
    sigma_t: np.ndarray
    device_id: str = ""
    t_bp: float = 0.01
    fitted_law: Optional[SelfHeatingLaw] = None
    out_of_range: np.ndarray = None

    def __post_init__(self):
        self.n_bar = np.asarray(self.n_bar, dtype=float)
        self.t_eff = np.asarray(self.t_eff, dtype=float)
        self.sigma_t = np.asarray(self.sigma_t, dtype=float)
        if self.out_of_range is None:
            self.out_of_range = np.zeros(self.n_bar.size, dtype=bool)
        ok = ~self.out_of_range
        if np.any(self.t_eff[ok] < self.t_bp - 1e-12):
            raise ValueError("effective temperature below base temperature")


@dataclass
class LossFitConfig:
    """Which terms enter the loss fit and which parameters are held fixed.

    ``relaxation`` is ``"full"``, ``"powerlaw"`` or ``"off"``.  ``self_heating``
    is ``"off"``, ``"fit"`` (A fitted jointly, beta from ``heat_beta``) or
    ``"fixed"`` (``heat_law`` applied as given).  ``frozen`` maps parameter
    names (``tan_res``, ``n_c``, ``tan_rel``, ``q_bg_inv``, ``heat_a``) to fixed
    values.  ``power_n_max`` drops power-sweep points above that photon number.
    """

    background: bool = True
    resonant: bool = True
    relaxation: str = "full"
    quasiparticle: bool = False
    self_heating: str = "off"
    heat_law: Optional[SelfHeatingLaw] = None
    heat_beta: float = 0.5
    power_n_max: Optional[float] = None
    frozen: dict = field(default_factory=dict)
    t0: float = 0.5
    d: int = 2
    kernel: Optional[RelaxKernelParams] = None
    qp: Optional[QpParams] = None
    ridge: float = 1e-12

    def __post_init__(self):
        if self.relaxation not in ("full", "powerlaw", "off"):
            raise ValueError(f"unknown relaxation mode {self.relaxation!r}")
        if self.self_heating not in ("off", "fit", "fixed"):
            raise ValueError(f"unknown self_heating mode {self.self_heating!r}")
        if self.self_heating == "fixed" and self.heat_law is None:
            raise ValueError("self_heating='fixed' needs heat_law")
        unknown = set(self.frozen) - set(_PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown frozen parameters {sorted(unknown)}")

    def resolved_kernel(self) -> RelaxKernelParams:
        k = self.kernel or default_kernel(self.d)
        if k.d != self.d:
            raise ValueError("kernel dimensionality differs from config d")
        return k

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kernel"] = asdict(self.resolved_kernel())
        out["qp"] = asdict(self.qp) if self.qp else None
        out["heat_law"] = asdict(self.heat_law) if self.heat_law else None
        return out


_PARAM_NAMES = ("tan_res", "n_c", "tan_rel", "q_bg_inv", "heat_a")


@dataclass
class FilmParams:
    """Shared film loss tangents; multiply by a device's F_SiN for its losses."""

    tan_res: float
    n_c: float
    tan_rel: float
    q_bg_inv: float
    t0: float = 0.5
    d: int = 2
    sigmas: dict = field(default_factory=dict)

    def tls_params(self, f_sin: float, with_shift=True, f0=None, kernel=None) -> TlsParams:
        """Per-device :class:`TlsParams`.

        Shift prefactors follow from the loss prefactors for a uniform TLS
        density of states when ``with_shift`` (needs ``f0`` and ``kernel`` for
        the relaxation part).
        """
        shift_res = shift_rel = 0.0
        if with_shift:
            shift_res = f_sin * self.tan_res / math.pi
            if f0 is not None and kernel is not None and self.tan_rel > 0:
                shift_rel = 0.5 * float(rel_scale_from_loss_tangent(f_sin * self.tan_rel, self.t0, f0, kernel))
        return TlsParams(
            f_tan_res=f_sin * max(self.tan_res, 0.0),
            n_c=self.n_c,
            f_tan_rel=f_sin * max(self.tan_rel, 0.0),
            t0=self.t0,
            d=self.d,
            q_bg_inv=max(self.q_bg_inv, 0.0),
            shift_res_scale=shift_res,
            shift_rel_scale=shift_rel,
        )


class LossModel:
    """Loss of one device as a function of photon number and temperature.

    Wraps shared film parameters with the device's F_SiN and f0; this is the
    temperature-dependent curve used for thermometry.
    """

    def __init__(self, film: FilmParams, f_sin: float, f0: float, relaxation="full",
                 kernel: Optional[RelaxKernelParams] = None, qp: Optional[QpParams] = None,
                 device_id: str = ""):
        self.film = film
        self.f_sin = float(f_sin)
        self.f0 = float(f0)
        self.relaxation = relaxation
        self.kernel = kernel or default_kernel(film.d)
        self.qp = replace(qp, f0=f0) if qp is not None else None
        self.device_id = device_id
        self._curve = relaxation_curve(self.f0, self.kernel) if relaxation == "full" else None

    def relaxation_shape(self, T):
        """Relaxation loss per unit loss tangent (1 at t0 in the low-T limit)."""
        if self.relaxation == "off":
            return np.zeros(np.shape(T))
        if self.relaxation == "powerlaw":
            return (np.asarray(T, dtype=float) / self.film.t0) ** self.film.d
        return self._curve.loss(T, 1.0, self.film.t0)

    def q_int_inv(self, n, T):
        f = self.film
        n = np.asarray(n, dtype=float)
        T = np.asarray(T, dtype=float)
        x = HBAR * 2.0 * math.pi * self.f0 / (2.0 * KB * T)
        q = f.q_bg_inv + self.f_sin * f.tan_res * np.tanh(x) / np.sqrt(1.0 + n / f.n_c)
        q = q + self.f_sin * f.tan_rel * self.relaxation_shape(T)
        if self.qp is not None:
            q = q + q_qp_inv(T, self.qp)
        return q[()] if np.ndim(q) == 0 else q

    def tls_params(self) -> TlsParams:
        return self.film.tls_params(self.f_sin, f0=self.f0, kernel=self.kernel)


@dataclass
class LossFit:
    film: FilmParams
    fit: FitResult
    config: LossFitConfig
    heat_law: Optional[SelfHeatingLaw]
    chi2: float
    dof: int
    residuals: np.ndarray
    points: list
    degenerate: bool
    warnings: list
    devices: dict

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else float("nan")

    def model(self, device_id: str) -> LossModel:
        f_sin, f0 = self.devices[device_id]
        return LossModel(self.film, f_sin, f0, self.config.relaxation,
                         self.config.resolved_kernel(), self.config.qp, device_id)

    def tls_params(self, device_id: str) -> TlsParams:
        return self.model(device_id).tls_params()


class OutOfRange(ValueError):
    """Measured loss outside what the model reaches on the bracket."""

    def __init__(self, message, model_range):
        super().__init__(message)
        self.model_range = model_range


class DetuningNotConverged(RuntimeError):
    def __init__(self, message, last_iterates):
        super().__init__(message)
        self.last_iterates = last_iterates


# ---------------------------------------------------------------- loss fit

def _stack(datasets: Iterable[Optional[LossDataset]], config: LossFitConfig):
    pts = []
    for ds in datasets:
        if ds is None:
            continue
        for p in ds.points:
            if ds.sweep_kind == "power" and config.power_n_max is not None and p.n_bar > config.power_n_max:
                continue
            pts.append(p)
    return pts


def fit_loss_model(power: Optional[LossDataset], temp: Optional[LossDataset],
                   config: Optional[LossFitConfig] = None) -> LossFit:
    """Joint weighted fit of the total-loss model to power and temperature sweeps.

    Loss tangents are shared by all devices and scaled by each point's F_SiN.
    Parameters: tan_res, n_c (fitted in log10), tan_rel, q_bg_inv and, with
    ``self_heating='fit'``, the heating coefficient A.  Weights are 1/sigma.
    """
    config = config or LossFitConfig()
    notes = []
    if (power is None or len(power) == 0) and (temp is None or len(temp) == 0):
        raise ValueError("no data to fit")
    pts = _stack([power, temp], config)
    if not pts:
        raise ValueError("no data left after power_n_max cut")
    n = np.array([p.n_bar for p in pts])
    tbp = np.array([p.t_bp for p in pts])
    q = np.array([p.q_int_inv for p in pts])
    sig = np.array([p.sigma for p in pts])
    fs = np.array([p.f_sin for p in pts])
    f0 = np.array([p.f0 for p in pts])
    devices = {}
    for p in pts:
        devices.setdefault(p.device_id, (p.f_sin, p.f0))

    kernel = config.resolved_kernel()
    degenerate = False
    if config.relaxation != "off":
        if temp is None or len(temp) == 0:
            notes.append("relaxation enabled but no temperature sweep supplied: tan_rel is weakly identified")
        if not np.any(tbp > 0.3) and config.self_heating == "off":
            notes.append("relaxation term requested with no data above 0.3 K: unidentifiable")
            degenerate = True

    groups = [(f, np.flatnonzero(f0 == f)) for f in np.unique(f0)]
    curves = {f: relaxation_curve(float(f), kernel) for f, _ in groups} if config.relaxation == "full" else {}
    qp = config.qp
    xw = HBAR * 2.0 * math.pi * f0 / (2.0 * KB)

    def temperature(A):
        if config.self_heating == "fit":
            return tbp + A * n ** config.heat_beta
        if config.self_heating == "fixed":
            return tbp + config.heat_law.heating(n)
        return tbp

    def rel_shape(T):
        if config.relaxation == "powerlaw":
            return (T / config.t0) ** config.d
        out = np.empty_like(T)
        for f, idx in groups:
            out[idx] = curves[f].loss(T[idx], 1.0, config.t0)
        return out

    def model(theta):
        tan_res, lg_nc, tan_rel, qbg, A = theta
        T = temperature(A)
        out = np.zeros_like(q)
        if config.background:
            out = out + qbg
        if config.resonant:
            out = out + fs * tan_res * np.tanh(xw / T) / np.sqrt(1.0 + n / 10.0 ** lg_nc)
        if config.relaxation != "off":
            out = out + fs * tan_rel * rel_shape(T)
        if qp is not None and config.quasiparticle:
            out = out + np.array([q_qp_inv(t, replace(qp, f0=f)) for t, f in zip(T, f0)])
        return out

    ridge_w = math.sqrt(config.ridge)

    def resid(theta):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TemperatureRangeWarning)
            r = (model(theta) - q) / sig
        if config.relaxation != "off":
            r = np.append(r, ridge_w * theta[2] / 1e-3)
        return r

    frozen = np.array([
        not config.resonant or "tan_res" in config.frozen,
        not config.resonant or "n_c" in config.frozen,
        config.relaxation == "off" or "tan_rel" in config.frozen,
        not config.background or "q_bg_inv" in config.frozen,
        config.self_heating != "fit" or "heat_a" in config.frozen,
    ])
    fixed = {
        "tan_res": config.frozen.get("tan_res", 0.0),
        "n_c": math.log10(config.frozen.get("n_c", 30.0)),
        "tan_rel": config.frozen.get("tan_rel", 0.0),
        "q_bg_inv": config.frozen.get("q_bg_inv", 0.0),
        "heat_a": config.frozen.get("heat_a", 0.0),
    }

    # starting values
    low = (n <= 10) & (tbp <= 0.1)
    sel = low if low.any() else np.ones_like(low)
    tan_res0 = float(np.median(q[sel] / np.maximum(fs[sel], 1e-6)))
    hot = tbp > 0.3
    tan_rel0 = 0.0
    if hot.any() and config.relaxation != "off":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TemperatureRangeWarning)
            shape = rel_shape(tbp)
        tan_rel0 = max(float(np.median((q[hot] - 0.2 * fs[hot] * tan_res0) / (fs[hot] * shape[hot]))), 0.0)
    q_bg0 = 0.1 * float(q.min())
    base = np.array([
        fixed["tan_res"] if frozen[0] else 0.8 * tan_res0,
        fixed["n_c"],
        fixed["tan_rel"] if frozen[2] else tan_rel0,
        fixed["q_bg_inv"] if frozen[3] else q_bg0,
        fixed["heat_a"],
    ])
    # keep the heated bath inside the tabulated relaxation range
    t_cap = 4.5 - float(tbp.max())
    a_max = t_cap / max(float(np.max(n ** config.heat_beta)), 1e-300) if config.self_heating == "fit" else 1.0
    starts = []
    nc_starts = [fixed["n_c"]] if frozen[1] else [0.5, 1.5, 2.5, 3.5]
    a_starts = [fixed["heat_a"]] if frozen[4] else [0.1 * a_max, 0.01 * a_max]
    for lg in nc_starts:
        for a in a_starts:
            s = base.copy()
            s[1] = lg
            s[4] = a
            starts.append(s)

    lo = np.array([-np.inf, -3.0, -np.inf, -np.inf, 0.0])
    hi = np.array([np.inf, 9.0, np.inf, np.inf, a_max])
    scale = np.array([1e-3, 1.0, 1e-3, 1e-5, 1e-3])
    best = None
    for s in starts:
        res = nlls_fit(FitProblem(resid, s, bounds=(lo, hi), frozen_mask=frozen, x_scale=scale), max_iter=300)
        if best is None or res.residual_norm < best.residual_norm:
            best = res
    res = best
    th = res.params
    sg = res.sigmas
    nc = 10.0 ** th[1]
    film = FilmParams(
        tan_res=float(th[0]), n_c=float(nc), tan_rel=float(th[2]), q_bg_inv=float(th[3]),
        t0=config.t0, d=config.d,
        sigmas={"tan_res": float(sg[0]), "n_c": float(nc * math.log(10.0) * sg[1]),
                "tan_rel": float(sg[2]), "q_bg_inv": float(sg[3])},
    )
    heat_law = None
    if config.self_heating == "fit":
        heat_law = SelfHeatingLaw(float(th[4]), config.heat_beta, float(np.min(tbp)), sigma_a=float(sg[4]))
    elif config.self_heating == "fixed":
        heat_law = config.heat_law
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TemperatureRangeWarning)
        r = (model(th) - q) / sig
    chi2 = float(r @ r)
    dof = int(r.size - (~frozen).sum())
    if res.degenerate:
        degenerate = True
        notes.append("normal equations singular at the solution; covariance unreliable")
    if not res.converged:
        notes.append(f"fit did not converge: {res.message}")
    return LossFit(film, res, config, heat_law, chi2, dof, r, pts, degenerate, notes, devices)


def fit_device_models(power, temp, config=None) -> dict:
    """Separate fits per device (each with F_SiN taken as given)."""
    out = {}
    devs = []
    for ds in (power, temp):
        if ds is not None:
            devs += [d for d in ds.devices() if d not in devs]
    for dev in devs:
        out[dev] = fit_loss_model(
            power.for_device(dev) if power is not None else None,
            temp.for_device(dev) if temp is not None else None,
            config,
        )
    return out


# ---------------------------------------------------------------- thermometry

def _loss_minimum(fun, lo, hi):
    grid = np.geomspace(lo, hi, 241)
    vals = fun(grid)
    i = int(np.argmin(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]
    # golden-section refinement in log T
    g = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = math.log(a), math.log(b)
    for _ in range(60):
        c = x2 - g * (x2 - x1)
        d = x1 + g * (x2 - x1)
        if fun(math.exp(c)) <= fun(math.exp(d)):
            x2 = d
        else:
            x1 = c
    t = math.exp(0.5 * (x1 + x2))
    return (t, float(fun(t))) if fun(t) <= vals[i] else (float(grid[i]), float(vals[i]))


def infer_effective_temperature(q_measured, n, model, bracket, tol=1e-12):
    """Temperature at which the model loss at photon number ``n`` equals ``q_measured``.

    ``model`` needs ``q_int_inv(n, T)``.  Returns ``bracket[0]`` (the base
    temperature) when the measured loss does not exceed the model there.  If
    the model is not monotone on the bracket, only the branch above its loss
    minimum is searched.
    """
    t_lo, t_hi = float(bracket[0]), float(bracket[1])

    def f(T):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TemperatureRangeWarning)
            return model.q_int_inv(n, T)

    q_lo = float(f(t_lo))
    q_hi = float(f(t_hi))
    if q_measured <= q_lo:
        return t_lo
    if q_measured > q_hi:
        raise OutOfRange(
            f"loss {q_measured:.4g} exceeds the model maximum {q_hi:.4g} on [{t_lo}, {t_hi}] K",
            (min(q_lo, q_hi), q_hi),
        )
    t_min, _ = _loss_minimum(f, t_lo, t_hi)
    start = max(t_min, t_lo)
    return find_root(lambda T: float(f(T)) - q_measured, (start, t_hi), tol=tol * max(1.0, t_hi))


def _temperature_sigma(model, n, q, sigma_q, bracket):
    """Half width of the temperature interval mapped from q -/+ sigma_q.

    Inverting the interval rather than using the local slope keeps the error
    honest where the loss-temperature curve is flat or folds back.
    """
    t_lo, t_hi = bracket
    try:
        up = infer_effective_temperature(q + sigma_q, n, model, bracket)
    except OutOfRange:
        up = t_hi
    try:
        down = infer_effective_temperature(q - sigma_q, n, model, bracket)
    except OutOfRange:
        down = t_hi
    return 0.5 * float(up - down)


def thermometry(power: LossDataset, models: dict, bracket_top=4.0, significance=1.0) -> dict:
    """Effective temperature for every power-sweep point, grouped by device.

    ``models`` maps device id to an object with ``q_int_inv(n, T)``.  A point
    whose loss exceeds the model at its base temperature by no more than
    ``significance`` times its sigma carries no detectable heating and is
    reported at T_bp; the folded loss-temperature curve would otherwise send
    small excursions to the hot branch.  Points the model cannot reach are
    flagged ``out_of_range`` rather than raising.
    """
    out = {}
    for dev in power.devices():
        ds = power.for_device(dev)
        model = models[dev]
        ns, ts, ss, bad = [], [], [], []
        t_bp = min(p.t_bp for p in ds.points)
        for p in ds.points:
            bracket = (p.t_bp, bracket_top)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", TemperatureRangeWarning)
                    q_base = float(model.q_int_inv(p.n_bar, p.t_bp))
                if p.q_int_inv <= q_base + significance * p.sigma:
                    T = p.t_bp
                else:
                    T = infer_effective_temperature(p.q_int_inv, p.n_bar, model, bracket)
                s = _temperature_sigma(model, p.n_bar, p.q_int_inv, p.sigma, bracket)
                flag = False
            except OutOfRange:
                T, s, flag = float("nan"), float("nan"), True
            ns.append(p.n_bar)
            ts.append(T)
            ss.append(s)
            bad.append(flag)
        out[dev] = SelfHeatingCurve(np.array(ns), np.array(ts), np.array(ss), dev, t_bp,
                                    out_of_range=np.array(bad))
    return out


def _fit_heating(n, dT, sig, beta, fit_beta):
    n = np.asarray(n, float)
    A0 = max(float(np.median(dT / n ** beta)), 1e-9) if n.size else 1e-3
    p0 = np.array([A0, beta])
    frozen = np.array([False, not fit_beta])

    def resid(p):
        return p[0] * n ** p[1] - dT

    res = nlls_fit(FitProblem(resid, p0, bounds=([0.0, 1e-3], [np.inf, 1.999]), weights=1.0 / sig,
                              frozen_mask=frozen, x_scale=[1e-3, 1.0]), max_iter=300)
    return res


def fit_self_heating(curves: Sequence[SelfHeatingCurve], beta=0.5, fit_beta=False) -> SelfHeatingLaw:
    """Joint power-law fit T_eff = T_bp + A n^beta over all devices (beta frozen by default).

    Points flagged out of range or with non-finite sigma are skipped.  The law
    is marked ``low_confidence`` when the usable photon numbers span less than
    two decades or fewer than two points remain.  Per-device A values are kept
    as a diagnostic.
    """
    ns, dts, sgs = [], [], []
    per_dev = {}
    t_bp = min(c.t_bp for c in curves) if curves else 0.01
    for c in curves:
        ok = ~c.out_of_range & np.isfinite(c.sigma_t) & (c.sigma_t > 0) & (c.n_bar > 0)
        ns.append(c.n_bar[ok])
        dts.append(c.t_eff[ok] - c.t_bp)
        sgs.append(c.sigma_t[ok])
        if ok.sum() >= 1:
            r = _fit_heating(c.n_bar[ok], c.t_eff[ok] - c.t_bp, c.sigma_t[ok], beta, False)
            per_dev[c.device_id] = float(r.params[0])
    n = np.concatenate(ns) if ns else np.zeros(0)
    dT = np.concatenate(dts) if dts else np.zeros(0)
    sg = np.concatenate(sgs) if sgs else np.zeros(0)
    low = n.size < 2 or (n.size and np.log10(n.max() / n.min()) < 2.0)
    if n.size == 0:
        return SelfHeatingLaw(0.0, beta, t_bp, low_confidence=True, per_device_a=per_dev)
    res = _fit_heating(n, dT, sg, beta, fit_beta)
    s = res.sigmas
    law = SelfHeatingLaw(float(res.params[0]), float(res.params[1]), t_bp, float(s[0]), float(s[1]),
                         bool(low or res.degenerate), per_dev)
    for c in curves:
        c.fitted_law = law
    return law


# ---------------------------------------------------------------- detuning loop

@dataclass
class DetuningModel:
    """Drive-dependent resonator: loss, frequency shift and heating versus n.

    ``base`` holds the resonator at T_bp and low power; frequency shifts are
    measured relative to T_bp.
    """

    base: ResonatorParams
    tls: TlsParams
    kernel: RelaxKernelParams
    t_bp: float = 0.01
    heat: Optional[SelfHeatingLaw] = None
    relaxation: str = "full"

    def __post_init__(self):
        self._curve = relaxation_curve(self.base.f0, self.kernel)
        self._q_ext_re = self.base.q_ext_inv_mag * math.cos(self.base.phi)
        self._shift_ref = self._shift(self.t_bp)
        self._qi_ref = self._q_int(1.0, self.t_bp)

    def temperature(self, n):
        T = self.t_bp + (float(self.heat.heating(n)) if self.heat is not None else 0.0)
        # trial photon numbers during bracketing can overshoot the tabulated
        # range; the loss there is already far above any steady state
        return min(T, self._curve.t_max)

    def _shift(self, T):
        s = float(dfrac_res(T, self.base.f0, self.tls))
        if self.tls.shift_rel_scale:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TemperatureRangeWarning)
                s += self.tls.shift_rel_scale * float(self._curve.unit_shift(T))
        return s

    def _q_int(self, n, T):
        p = self.tls
        x = HBAR * 2.0 * math.pi * self.base.f0 / (2.0 * KB * T)
        q = p.q_bg_inv + p.f_tan_res * math.tanh(x) / math.sqrt(1.0 + n / p.n_c)
        if self.relaxation != "off" and p.f_tan_rel:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TemperatureRangeWarning)
                q += float(self._curve.loss(T, p.f_tan_rel, p.t0))
        return q

    def f0_at(self, n) -> float:
        T = self.temperature(n)
        return self.base.f0 * (1.0 + self._shift(T) - self._shift_ref)

    def params_at(self, n) -> ResonatorParams:
        T = self.temperature(n)
        qi = self.base.q_int_inv + self._q_int(n, T) - self._qi_ref
        return ResonatorParams(self.f0_at(n), qi + self._q_ext_re, self.base.q_ext_inv_mag, self.base.phi)

    def steady_state(self, P_inc, f_drive) -> float:
        """Self-consistent photon number for a drive at ``f_drive`` (Hz)."""

        def h(u):
            nn = math.exp(u)
            p = self.params_at(nn)
            return math.log(max(float(photon_number(p, P_inc, f_drive - p.f0)), 1e-300)) - u

        if P_inc == 0:
            return 0.0
        n0 = float(photon_number(self.params_at(1.0), P_inc, f_drive - self.base.f0))
        lo, hi = math.log(max(n0, 1e-12)) - 1.0, math.log(max(n0, 1e-12)) + 1.0
        for _ in range(60):
            if h(lo) > 0:
                break
            lo -= 2.0
        for _ in range(60):
            if h(hi) < 0:
                break
            hi += 2.0
        return math.exp(find_root(h, (lo, hi), tol=1e-13))


@dataclass
class DetuningResult:
    drive_freq: float
    n_bar: float
    iterations: int
    f0: float
    detuning: float
    history: list


def converge_detuning(target_detuning, drive_power, model: DetuningModel, f_guess=None,
                      rel_tol=1e-4, max_iter=100) -> DetuningResult:
    """Repeat: drive at assumed f0 + target, measure the resonator, update f0.

    Stops when the measured detuning differs from the target by less than
    ``rel_tol`` (relative).  Raises :class:`DetuningNotConverged` with the last
    two iterates after ``max_iter`` rounds.
    """
    if target_detuning == 0:
        raise ValueError("target_detuning must be nonzero")
    f_assumed = model.base.f0 if f_guess is None else float(f_guess)
    history = []
    for it in range(1, max_iter + 1):
        f_drive = f_assumed + target_detuning
        n = model.steady_state(drive_power, f_drive)
        f_meas = model.f0_at(n)
        measured = f_drive - f_meas
        history.append((f_drive, n, f_meas, measured))
        if abs(measured - target_detuning) < rel_tol * abs(target_detuning):
            return DetuningResult(f_drive, n, it, f_meas, measured, history)
        f_assumed = f_meas
    raise DetuningNotConverged(
        f"detuning did not converge in {max_iter} iterations (possible bistability)", history[-2:]
    )
