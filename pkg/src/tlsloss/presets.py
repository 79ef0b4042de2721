"""Reported device and film constants used as generator defaults.

Every value carries a provenance string so model cards and reports can say
where it came from.  Participation fractions and the critical photon number
are not reported for the devices and are illustrative choices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .response import ResonatorParams

__all__ = ["DeviceRow", "TABLE_A1", "FilmPreset", "AS_DEPOSITED", "ANNEALED", "FILMS", "table_params"]


@dataclass(frozen=True)
class DeviceRow:
    device_id: str
    f0_hz: float
    q_int_inv: float
    q_ext_inv: float


# Centre frequency, internal loss and coupling at T_bp = 10 mK, n ~ 1.
TABLE_A1 = {
    "as-deposited": (
        DeviceRow("A", 5.968e9, 18.4e-5, 9.3e-5),
        DeviceRow("B", 6.133e9, 16.2e-5, 10.3e-5),
        DeviceRow("C", 6.289e9, 12.5e-5, 22.4e-5),
        DeviceRow("D", 6.384e9, 7.5e-5, 9.8e-5),
        DeviceRow("E", 6.480e9, 1.9e-5, 15.3e-5),
    ),
    "annealed": (
        DeviceRow("A", 5.959e9, 2.4e-5, 9.8e-5),
        DeviceRow("B", 6.103e9, 2.2e-5, 12.4e-5),
        DeviceRow("C", 6.271e9, 1.9e-5, 23.1e-5),
        DeviceRow("D", 6.362e9, 1.3e-5, 8.7e-5),
        DeviceRow("E", 6.443e9, 0.8e-5, 16.6e-5),
    ),
}


def table_params(film: str) -> list[ResonatorParams]:
    """Table rows as :class:`ResonatorParams` with phi = 0."""
    return [ResonatorParams.from_internal(r.f0_hz, r.q_int_inv, r.q_ext_inv) for r in TABLE_A1[film]]


@dataclass(frozen=True)
class FilmPreset:
    name: str
    tan_res: float
    tan_rel: float
    t0: float
    d: int
    n_c: float
    q_bg_inv: float
    heat_a: float
    heat_beta: float
    f_sin: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)


_F_SIN = {"A": 0.12, "B": 0.10, "C": 0.08, "D": 0.05, "E": 0.012}

_COMMON_PROVENANCE = {
    "t0": "reference temperature 500 mK used for the relaxation loss tangents",
    "d": "phonon-bath dimensionality fixed to 2 after the T^2 dependence between 0.3 and 1 K",
    "heat_beta": "self-heating exponent fixed at 0.5",
    "n_c": "illustrative; critical photon numbers are not reported",
    "q_bg_inv": "illustrative constant background",
    "f_sin": "illustrative participation fractions ordered A > B > C > D > E",
}

AS_DEPOSITED = FilmPreset(
    name="as-deposited",
    tan_res=1.4e-3,
    tan_rel=3.4e-3,
    t0=0.5,
    d=2,
    n_c=30.0,
    q_bg_inv=5e-6,
    heat_a=7e-4,
    heat_beta=0.5,
    f_sin=dict(_F_SIN),
    provenance={
        **_COMMON_PROVENANCE,
        "tan_res": "fitted resonant loss tangent (1.4 +- 0.1)e-3, as-deposited film",
        "tan_rel": "fitted relaxation loss tangent (3.4 +- 0.1)e-3 at 500 mK, as-deposited film",
        "heat_a": "chosen so that T_eff exceeds 2 K at n = 1e7",
    },
)

ANNEALED = FilmPreset(
    name="annealed",
    tan_res=4.8e-4,
    tan_rel=8e-6,
    t0=0.5,
    d=2,
    n_c=30.0,
    q_bg_inv=5e-6,
    heat_a=0.0,
    heat_beta=0.5,
    f_sin=dict(_F_SIN),
    provenance={
        **_COMMON_PROVENANCE,
        "tan_res": "fitted resonant loss tangent (4.8 +- 0.4)e-4, annealed film",
        "tan_rel": "fitted relaxation loss tangent (8 +- 8)e-6 at 500 mK, annealed film",
        "heat_a": "no power-induced excess loss observed after annealing",
    },
)

FILMS = {"as-deposited": AS_DEPOSITED, "annealed": ANNEALED}
