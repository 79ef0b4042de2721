"""File formats: CSV tables with JSON sidecars, all in SI units with
unit-suffixed names.  Floats are written with ``repr`` so every file reads back
bit-for-bit."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .ftir import IrSpectrum
from .inference import FilmParams, LossDataset, LossPoint, SelfHeatingCurve, SelfHeatingLaw
from .response import FrequencySweep

__all__ = [
    "SchemaError",
    "sidecar_path",
    "write_json",
    "read_json",
    "write_sweep",
    "read_sweep",
    "write_loss_dataset",
    "read_loss_dataset",
    "write_device_table",
    "read_device_table",
    "write_thermometry",
    "read_thermometry",
    "write_spectrum",
    "read_spectrum",
    "film_to_dict",
    "film_from_dict",
    "model_card",
    "write_curve_csv",
]

SWEEP_COLUMNS = ("freq_hz", "re_s21", "im_s21")
LOSS_COLUMNS = ("device_id", "n_bar", "t_bp_kelvin", "qi_inv", "qi_inv_sigma")
THERMO_COLUMNS = ("n_bar", "t_eff_kelvin", "t_eff_sigma", "device_id")
SPECTRUM_COLUMNS = ("wavenumber_cm1", "absorbance")


class SchemaError(ValueError):
    """A file does not match its schema; ``field`` names the offending column or key."""

    def __init__(self, path, field, message):
        super().__init__(f"{path}: field {field!r}: {message}")
        self.path = str(path)
        self.field = field


def _fmt(x) -> str:
    return repr(float(x))


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(path, "<json>", str(exc)) from exc


def _read_table(path, columns):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(path, "<header>", "file is empty") from None
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(path, missing[0], "missing column")
        idx = [header.index(c) for c in columns]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise SchemaError(path, columns[len(row)] if len(row) < len(columns) else "<row>",
                                  f"line {lineno} has {len(row)} of {len(header)} fields")
            rows.append([row[i].strip() for i in idx])
    return rows


def _float(path, field, s):
    try:
        v = float(s)
    except ValueError:
        raise SchemaError(path, field, f"not a number: {s!r}") from None
    if not math.isfinite(v):
        raise SchemaError(path, field, f"non-finite value {s!r}")
    return v


def _require(path, d, keys):
    if not isinstance(d, dict):
        raise SchemaError(path, "<json>", "expected a JSON object")
    for k in keys:
        if k not in d:
            raise SchemaError(path, k, "missing key")


# ---------------------------------------------------------------- sweeps

def write_sweep(path, sweep: FrequencySweep) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for f, s in zip(sweep.freqs, sweep.s21):
            w.writerow([_fmt(f), _fmt(s.real), _fmt(s.imag)])
    write_json(sidecar_path(path), {
        "device_id": sweep.device_id,
        "p_inc_watt": float(sweep.drive_power_incident),
        "detuning_hz": float(sweep.drive_detuning),
        "t_bp_kelvin": float(sweep.base_temp),
    })
    return path


def read_sweep(path) -> FrequencySweep:
    path = Path(path)
    rows = _read_table(path, SWEEP_COLUMNS)
    if not rows:
        raise SchemaError(path, "freq_hz", "no data rows")
    f = np.array([_float(path, "freq_hz", r[0]) for r in rows])
    s = np.array([complex(_float(path, "re_s21", r[1]), _float(path, "im_s21", r[2])) for r in rows])
    side = sidecar_path(path)
    meta = read_json(side) if side.exists() else {}
    if not isinstance(meta, dict):
        raise SchemaError(side, "<json>", "expected a JSON object")
    try:
        return FrequencySweep(
            f, s,
            drive_power_incident=float(meta.get("p_inc_watt", 0.0)),
            drive_detuning=float(meta.get("detuning_hz", 1.5e6)),
            base_temp=float(meta.get("t_bp_kelvin", 0.01)),
            device_id=str(meta.get("device_id", path.stem)),
        )
    except ValueError as exc:
        raise SchemaError(path, "freq_hz", str(exc)) from exc


# ---------------------------------------------------------------- loss data

def write_device_table(path, devices: dict) -> None:
    """``devices`` maps id to ``{f0_hz, f_sin, q_ext_inv}``."""
    write_json(path, {k: {"f0_hz": float(v["f0_hz"]), "f_sin": float(v["f_sin"]), "q_ext_inv": float(v["q_ext_inv"])}
                      for k, v in devices.items()})


def read_device_table(path) -> dict:
    table = read_json(path)
    if not isinstance(table, dict):
        raise SchemaError(path, "<json>", "expected a JSON object keyed by device id")
    out = {}
    for dev, row in table.items():
        _require(path, row, ("f0_hz", "f_sin", "q_ext_inv"))
        out[str(dev)] = {k: float(row[k]) for k in ("f0_hz", "f_sin", "q_ext_inv")}
    return out


def write_loss_dataset(path, ds: LossDataset) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOSS_COLUMNS)
        for p in ds.points:
            w.writerow([p.device_id, _fmt(p.n_bar), _fmt(p.t_bp), _fmt(p.q_int_inv), _fmt(p.sigma)])
    return path


def read_loss_dataset(path, devices, sweep_kind="power") -> LossDataset:
    """Loss CSV joined with the device table (a dict or a path to one)."""
    path = Path(path)
    table = devices if isinstance(devices, dict) else read_device_table(devices)
    pts = []
    for r in _read_table(path, LOSS_COLUMNS):
        dev = r[0]
        if dev not in table:
            raise SchemaError(path, "device_id", f"device {dev!r} not in device table")
        row = table[dev]
        try:
            pts.append(LossPoint(
                _float(path, "n_bar", r[1]), _float(path, "t_bp_kelvin", r[2]), _float(path, "qi_inv", r[3]),
                _float(path, "qi_inv_sigma", r[4]), dev, float(row["f_sin"]), float(row["f0_hz"]),
            ))
        except SchemaError:
            raise
        except ValueError as exc:
            field = "qi_inv_sigma" if "sigma" in str(exc) else "n_bar" if "n_bar" in str(exc) else "f_sin"
            raise SchemaError(path, field, str(exc)) from exc
    if not pts:
        raise SchemaError(path, "device_id", "no data rows")
    return LossDataset(pts, sweep_kind)


# ---------------------------------------------------------------- thermometry

def write_thermometry(path, curves: Iterable[SelfHeatingCurve]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(THERMO_COLUMNS)
        for c in curves:
            for n, t, s in zip(c.n_bar, c.t_eff, c.sigma_t):
                w.writerow([_fmt(n), _fmt(t), _fmt(s), c.device_id])
    return path


def read_thermometry(path, t_bp: Optional[dict] = None) -> list[SelfHeatingCurve]:
    """Curves per device; out-of-range points are the rows with NaN temperature."""
    path = Path(path)
    rows = _read_table(path, THERMO_COLUMNS)
    by_dev: dict = {}
    for r in rows:
        by_dev.setdefault(r[3], []).append((float(r[0]), float(r[1]), float(r[2])))
    out = []
    for dev, vals in by_dev.items():
        a = np.array(vals)
        bad = ~np.isfinite(a[:, 1])
        base = (t_bp or {}).get(dev, float(np.nanmin(a[:, 1])) if (~bad).any() else 0.0)
        out.append(SelfHeatingCurve(a[:, 0], a[:, 1], a[:, 2], dev, base, out_of_range=bad))
    return out


# ---------------------------------------------------------------- spectra

def write_spectrum(path, s: IrSpectrum) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPECTRUM_COLUMNS)
        for x, y in zip(s.wavenumber, s.absorbance):
            w.writerow([_fmt(x), _fmt(y)])
    write_json(sidecar_path(path), {"thickness_cm": float(s.thickness), "label": s.label})
    return path


def read_spectrum(path) -> IrSpectrum:
    path = Path(path)
    rows = _read_table(path, SPECTRUM_COLUMNS)
    side = sidecar_path(path)
    if not side.exists():
        raise SchemaError(side, "thickness_cm", "sidecar JSON missing")
    meta = read_json(side)
    _require(side, meta, ("thickness_cm",))
    w = np.array([_float(path, "wavenumber_cm1", r[0]) for r in rows])
    a = np.array([_float(path, "absorbance", r[1]) for r in rows])
    try:
        return IrSpectrum(w, a, float(meta["thickness_cm"]), str(meta.get("label", "other")))
    except ValueError as exc:
        field = "thickness_cm" if "thickness" in str(exc) else "wavenumber_cm1"
        raise SchemaError(path, field, str(exc)) from exc


# ---------------------------------------------------------------- model parameters

def film_to_dict(film: FilmParams, heat: Optional[SelfHeatingLaw] = None) -> dict:
    out = {
        "tan_delta_res": film.tan_res,
        "n_c": film.n_c,
        "tan_delta_rel": film.tan_rel,
        "q_bg_inv": film.q_bg_inv,
        "t0_kelvin": film.t0,
        "d": film.d,
        "sigmas": {
            "tan_delta_res": film.sigmas.get("tan_res"),
            "n_c": film.sigmas.get("n_c"),
            "tan_delta_rel": film.sigmas.get("tan_rel"),
            "q_bg_inv": film.sigmas.get("q_bg_inv"),
        },
    }
    if heat is not None:
        out["self_heating"] = {
            "a_kelvin": heat.a_coeff, "beta": heat.beta, "t_bp_kelvin": heat.t_bp,
            "sigma_a_kelvin": heat.sigma_a, "sigma_beta": heat.sigma_beta,
            "low_confidence": heat.low_confidence, "per_device_a_kelvin": dict(heat.per_device_a),
        }
    return out


def film_from_dict(d: dict, path="<model>"):
    """Inverse of :func:`film_to_dict`; returns ``(FilmParams, SelfHeatingLaw | None)``."""
    _require(path, d, ("tan_delta_res", "n_c", "tan_delta_rel", "q_bg_inv", "t0_kelvin", "d"))
    sig = d.get("sigmas") or {}
    keymap = {"tan_delta_res": "tan_res", "n_c": "n_c", "tan_delta_rel": "tan_rel", "q_bg_inv": "q_bg_inv"}
    film = FilmParams(float(d["tan_delta_res"]), float(d["n_c"]), float(d["tan_delta_rel"]),
                      float(d["q_bg_inv"]), float(d["t0_kelvin"]), int(d["d"]),
                      {keymap[k]: float(v) for k, v in sig.items() if v is not None and k in keymap})
    heat = None
    if d.get("self_heating"):
        h = d["self_heating"]
        _require(path, h, ("a_kelvin", "beta", "t_bp_kelvin"))
        heat = SelfHeatingLaw(float(h["a_kelvin"]), float(h["beta"]), float(h["t_bp_kelvin"]),
                              float(h.get("sigma_a_kelvin", 0.0)), float(h.get("sigma_beta", 0.0)),
                              bool(h.get("low_confidence", False)), dict(h.get("per_device_a_kelvin", {})))
    return film, heat


def model_card(params: dict, provenance: dict, default="fitted to the supplied data") -> str:
    """Markdown table of every parameter with its value and provenance string."""
    lines = ["| parameter | value | provenance |", "|---|---|---|"]
    for k in sorted(params):
        v = params[k]
        if isinstance(v, dict):
            v = json.dumps(v, sort_keys=True)
        lines.append(f"| {k} | {v} | {provenance.get(k, default)} |")
    return "\n".join(lines) + "\n"


def write_curve_csv(path, columns: dict) -> Path:
    """Plot-ready columns of equal length, written in the given order."""
    path = Path(path)
    names = list(columns)
    arrs = [np.asarray(columns[k]) for k in names]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*arrs):
            w.writerow([x if isinstance(x, str) else _fmt(x) for x in row])
    return path
