"""Two-level-system loss analysis for superconducting resonators on SiN films.

Forward models of resonant and relaxation TLS loss, resonator transmission
fits, joint loss-tangent extraction, self-heating thermometry and FT-IR
hydrogen content, plus a small command line pipeline.
"""
__version__ = "0.1.0"

from .response import FrequencySweep, ResonatorParams, fit_s21, normalize_sweep, photon_number, s21_model
from .tlsmodel import (
    QpParams,
    RelaxKernelParams,
    TlsParams,
    q_qp_inv,
    q_rel_inv_full,
    q_res_inv,
    q_total_inv,
)
from .inference import (
    LossDataset,
    LossFitConfig,
    LossPoint,
    SelfHeatingLaw,
    converge_detuning,
    fit_loss_model,
    fit_self_heating,
    infer_effective_temperature,
)
from .ftir import IrSpectrum, fit_peaks, hydrogen_content, remove_baseline

__all__ = [
    "FrequencySweep",
    "ResonatorParams",
    "fit_s21",
    "normalize_sweep",
    "photon_number",
    "s21_model",
    "QpParams",
    "RelaxKernelParams",
    "TlsParams",
    "q_qp_inv",
    "q_rel_inv_full",
    "q_res_inv",
    "q_total_inv",
    "LossDataset",
    "LossFitConfig",
    "LossPoint",
    "SelfHeatingLaw",
    "converge_detuning",
    "fit_loss_model",
    "fit_self_heating",
    "infer_effective_temperature",
    "IrSpectrum",
    "fit_peaks",
    "hydrogen_content",
    "remove_baseline",
]
