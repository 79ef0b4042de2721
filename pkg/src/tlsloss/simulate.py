"""Synthetic experiments: loss datasets, S21 sweeps and FT-IR spectra generated
from the forward models with seeded noise."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ftir import NH_CENTER, SIH_CENTER, IrSpectrum, synthetic_spectrum
from .inference import FilmParams, LossDataset, LossModel, LossPoint, SelfHeatingLaw
from .presets import FILMS, TABLE_A1, FilmPreset
from .response import NoiseSpec, ResonatorParams, default_grid, incident_power_for, synth_sweep
from .tlsmodel import RelaxKernelParams, TemperatureRangeWarning, default_kernel

__all__ = [
    "DeviceSpec",
    "Scenario",
    "film_params",
    "preset_devices",
    "heating_law",
    "device_models",
    "synth_loss_data",
    "synth_sweeps",
    "synth_spectra",
    "DEFAULT_POWER_GRID",
    "DEFAULT_TEMP_GRID",
]

DEFAULT_POWER_GRID = tuple(float(x) for x in np.geomspace(1.0, 1e7, 29))
DEFAULT_TEMP_GRID = tuple(float(x) for x in np.geomspace(0.01, 1.2, 25))

# Peak areas (absorbance * cm^-1 per 100 nm of film) for the two presets; the
# annealed film carries 1/20 of the as-deposited hydrogen.
_IR_AREAS = {
    "as-deposited": {"SiH": 0.2, "NH": 0.4},
    "annealed": {"SiH": 0.01, "NH": 0.02},
}


@dataclass(frozen=True)
class DeviceSpec:
    device_id: str
    f0: float
    f_sin: float
    q_ext_inv: float

    def __post_init__(self):
        if not self.f0 > 0:
            raise ValueError("f0 must be > 0")
        if not 0.0 <= self.f_sin <= 1.0:
            raise ValueError("f_sin must lie in [0, 1]")
        if not self.q_ext_inv > 0:
            raise ValueError("q_ext_inv must be > 0")


@dataclass
class Scenario:
    """Everything needed to regenerate a synthetic bundle.

    ``devices`` defaults to the five table rows of the chosen film with the
    preset participation fractions.
    """

    film: str = "as-deposited"
    seed: int = 0
    devices: Optional[list] = None
    power_grid: Sequence[float] = DEFAULT_POWER_GRID
    temp_grid: Sequence[float] = DEFAULT_TEMP_GRID
    t_bp: float = 0.01
    temp_sweep_n: float = 1.0
    loss_noise: float = 0.01
    sigma_iq: float = 1e-3
    sweep_points: int = 401
    self_heating: bool = True
    sweeps: bool = True
    spectra: bool = True
    thicknesses_cm: Sequence[float] = (8e-5, 7e-5, 6e-5, 5e-5)
    ir_noise: float = 0.0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.film not in FILMS:
            raise ValueError(f"unknown film preset {self.film!r}; choose from {sorted(FILMS)}")
        if self.devices is None:
            self.devices = preset_devices(self.film)
        self.devices = [d if isinstance(d, DeviceSpec) else DeviceSpec(**d) for d in self.devices]
        if not self.devices:
            raise ValueError("scenario needs at least one device")
        if len({d.device_id for d in self.devices}) != len(self.devices):
            raise ValueError("device ids must be unique")
        if min(self.power_grid, default=1.0) < 0 or min(self.temp_grid, default=1.0) <= 0:
            raise ValueError("grids must be positive")
        if self.loss_noise < 0 or self.sigma_iq < 0 or self.ir_noise < 0:
            raise ValueError("noise levels must be >= 0")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        unknown = set(self.overrides) - set(FilmPreset.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown preset overrides {sorted(unknown)}")

    @property
    def preset(self) -> FilmPreset:
        from dataclasses import replace

        return replace(FILMS[self.film], **self.overrides)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["power_grid"] = list(self.power_grid)
        out["temp_grid"] = list(self.temp_grid)
        out["thicknesses_cm"] = list(self.thicknesses_cm)
        return out


def preset_devices(film: str) -> list[DeviceSpec]:
    pre = FILMS[film]
    return [DeviceSpec(r.device_id, r.f0_hz, pre.f_sin[r.device_id], r.q_ext_inv) for r in TABLE_A1[film]]


def film_params(preset: FilmPreset) -> FilmParams:
    return FilmParams(preset.tan_res, preset.n_c, preset.tan_rel, preset.q_bg_inv, preset.t0, preset.d)


def heating_law(preset: FilmPreset, t_bp=0.01) -> Optional[SelfHeatingLaw]:
    return SelfHeatingLaw(preset.heat_a, preset.heat_beta, t_bp) if preset.heat_a > 0 else None


def device_models(preset: FilmPreset, devices, kernel: Optional[RelaxKernelParams] = None) -> dict:
    film = film_params(preset)
    kernel = kernel or default_kernel(preset.d)
    return {d.device_id: LossModel(film, d.f_sin, d.f0, "full", kernel, device_id=d.device_id) for d in devices}


def synth_loss_data(scenario: Scenario, rng: Optional[np.random.Generator] = None):
    """Power and temperature sweeps of Q_i^-1 with relative Gaussian noise.

    Power sweeps run at ``t_bp``; the TLS bath sits at T_bp + A n^beta when self
    heating is on.  Temperature sweeps hold ``temp_sweep_n`` photons.  Each
    point's sigma is ``loss_noise`` times its noiseless value.
    """
    rng = np.random.default_rng(scenario.seed) if rng is None else rng
    pre = scenario.preset
    models = device_models(pre, scenario.devices)
    law = heating_law(pre, scenario.t_bp) if scenario.self_heating else None

    def t_eff(n, tbp):
        return tbp + (float(law.heating(n)) if law is not None else 0.0)

    def point(dev, n, tbp):
        q = float(models[dev.device_id].q_int_inv(n, t_eff(n, tbp)))
        sig = max(scenario.loss_noise * q, 1e-300)
        noisy = q + (scenario.loss_noise * q * rng.standard_normal() if scenario.loss_noise > 0 else 0.0)
        return LossPoint(float(n), float(tbp), noisy, sig if scenario.loss_noise > 0 else max(1e-3 * q, 1e-300),
                         dev.device_id, dev.f_sin, dev.f0)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TemperatureRangeWarning)
        power = [point(d, n, scenario.t_bp) for d in scenario.devices for n in scenario.power_grid]
        temp = [point(d, scenario.temp_sweep_n, t) for d in scenario.devices for t in scenario.temp_grid]
    return LossDataset(power, "power"), LossDataset(temp, "temperature")


def synth_sweeps(scenario: Scenario, rng: Optional[np.random.Generator] = None, detuning=1.5e6):
    """One S21 sweep per device at its low-power operating point."""
    rng = np.random.default_rng(scenario.seed) if rng is None else rng
    rows = {r.device_id: r for r in TABLE_A1[scenario.film]}
    out = []
    for d in scenario.devices:
        qi = rows[d.device_id].q_int_inv if d.device_id in rows else 1e-5
        p = ResonatorParams.from_internal(d.f0, qi, d.q_ext_inv)
        noise = NoiseSpec(scenario.sigma_iq, int(rng.integers(0, 2 ** 63 - 1)))
        grid = default_grid(p, points=scenario.sweep_points)
        sw = synth_sweep(p, grid, noise, drive_power_incident=float(incident_power_for(p, 1.0, detuning)),
                         drive_detuning=detuning, base_temp=scenario.t_bp, device_id=d.device_id)
        out.append(sw)
    return out


def synth_spectra(scenario: Scenario, rng: Optional[np.random.Generator] = None) -> list[IrSpectrum]:
    """FT-IR spectra of the film at each thickness; areas scale with thickness."""
    rng = np.random.default_rng(scenario.seed) if rng is None else rng
    areas = _IR_AREAS[scenario.film]
    out = []
    for t in scenario.thicknesses_cm:
        k = t / 1e-5
        peaks = [(areas["SiH"] * k, SIH_CENTER, 50.0), (areas["NH"] * k, NH_CENTER, 60.0)]
        base = (0.02 + 0.01 * k, 0.004, -0.003, 0.001)
        out.append(synthetic_spectrum(peaks, t, scenario.film, baseline=base, noise=scenario.ir_noise,
                                      seed=int(rng.integers(0, 2 ** 63 - 1))))
    return out
