"""Command line pipeline: ``tlsloss <subcommand>``.

Subcommands chain the library end to end:

    simulate     write a synthetic bundle (sweeps, loss tables, spectra)
    fit-s21      fit resonator sweeps, one JSON each plus a summary table
    fit-loss     joint TLS loss fit with model curves
    thermometry  effective temperature per power-sweep point and the heating law
    ftir         baseline, peak fits and hydrogen content per spectrum

Exit status is 0 only when every item succeeded, 1 when some item failed
and 2 for usage or schema errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import traceback
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import io as tio
from .ftir import MATRIX_DENSITY, analyze_spectrum
from .inference import (
    LossFitConfig,
    LossModel,
    SelfHeatingLaw,
    fit_device_models,
    fit_loss_model,
    fit_self_heating,
    thermometry,
)
from .plotting import write_svg
from .response import fit_s21, normalize_sweep
from .simulate import Scenario, film_params, heating_law, synth_loss_data, synth_spectra, synth_sweeps
from .tlsmodel import TemperatureRangeWarning

log = logging.getLogger("tlsloss")

EXIT_OK, EXIT_FAILURES, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Resolved settings of one run; reports embed this so they can be replayed.

    ``inputs`` maps role names (``sweeps``, ``power``, ``temperature``,
    ``devices``, ``model``, ``spectra``, ``scenario``) to a path or list of paths.
    """

    command: str = ""
    inputs: dict = field(default_factory=dict)
    out: str = "out"
    seed: Optional[int] = None
    jobs: int = 1
    background: bool = True
    resonant: bool = True
    relaxation: str = "full"
    quasiparticle: bool = False
    self_heating: str = "off"
    power_n_max: Optional[float] = 1e3
    frozen: dict = field(default_factory=dict)
    t0_kelvin: float = 0.5
    d: int = 2
    heat_beta: float = 0.5
    fit_beta: bool = False
    thermometry_mode: str = "shared"
    bracket_top_kelvin: float = 4.0
    normalize: bool = True
    edge_fraction: float = 0.1
    ftir_degree: int = 3
    ftir_window_cm1: float = 300.0
    cross_sections_cm2: dict = field(default_factory=lambda: {"SiH": 7.4e-18, "NH": 5.3e-18})
    matrix_density_cm3: float = MATRIX_DENSITY
    scenario: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    def validate(self) -> None:
        if self.relaxation not in ("full", "powerlaw", "off"):
            raise ConfigError(f"relaxation: unknown mode {self.relaxation!r}")
        if self.self_heating not in ("off", "fit", "fixed"):
            raise ConfigError(f"self_heating: unknown mode {self.self_heating!r}")
        if self.thermometry_mode not in ("shared", "per-device"):
            raise ConfigError(f"thermometry_mode: unknown mode {self.thermometry_mode!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.seed is not None and not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.command == "simulate" and self.seed is None:
            raise ConfigError("seed is required for simulate")
        for role, paths in self.inputs.items():
            for p in paths if isinstance(paths, list) else [paths]:
                if p is not None and not Path(p).exists():
                    raise ConfigError(f"inputs.{role}: path does not exist: {p}")

    def to_dict(self) -> dict:
        return asdict(self)

    def loss_config(self) -> LossFitConfig:
        heat = None
        if self.self_heating == "fixed":
            h = self.frozen.get("heat_law")
            if not h:
                raise ConfigError("self_heating='fixed' needs frozen.heat_law = {a_kelvin, beta, t_bp_kelvin}")
            heat = SelfHeatingLaw(float(h["a_kelvin"]), float(h.get("beta", 0.5)), float(h.get("t_bp_kelvin", 0.01)))
        frozen = {k: float(v) for k, v in self.frozen.items() if k != "heat_law"}
        return LossFitConfig(
            background=self.background, resonant=self.resonant, relaxation=self.relaxation,
            quasiparticle=self.quasiparticle, self_heating=self.self_heating, heat_law=heat,
            heat_beta=self.heat_beta, power_n_max=self.power_n_max, frozen=frozen, t0=self.t0_kelvin, d=self.d,
        )


# ---------------------------------------------------------------- helpers

def _out_dir(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _run_items(items, fn, jobs):
    """Apply ``fn`` to every item; exceptions are captured per item and results keep input order."""

    def safe(x):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TemperatureRangeWarning)
                return True, fn(x)
        except Exception as exc:  # per-item isolation
            return False, f"{type(exc).__name__}: {exc}"

    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(safe, items))
    return [safe(x) for x in items]


def _report_failures(kind, items, results, out: Path) -> int:
    errors = [{"input": str(i), "error": r} for i, (ok, r) in zip(items, results) if not ok]
    for e in errors:
        log.error("%s failed for %s: %s", kind, e["input"], e["error"])
    if errors:
        tio.write_json(out / "errors.json", errors)
    return len(errors)


def _loss_inputs(cfg: RunConfig):
    dev = cfg.inputs.get("devices")
    if not dev:
        raise ConfigError("inputs.devices: device table JSON is required")
    table = tio.read_device_table(dev)
    power = tio.read_loss_dataset(cfg.inputs["power"], table, "power") if cfg.inputs.get("power") else None
    temp = tio.read_loss_dataset(cfg.inputs["temperature"], table, "temperature") if cfg.inputs.get("temperature") else None
    if power is None and temp is None:
        raise ConfigError("inputs.power / inputs.temperature: at least one loss table is required")
    return table, power, temp


# ---------------------------------------------------------------- commands

def cmd_fit_s21(cfg: RunConfig) -> int:
    files = list(cfg.inputs.get("sweeps") or [])
    if not files:
        raise ConfigError("fit-s21 needs at least one sweep file")
    out = _out_dir(cfg)

    def work(path):
        sw = tio.read_sweep(path)
        if cfg.normalize:
            sw = normalize_sweep(sw, cfg.edge_fraction)
        p = fit_s21(sw, max_iter=int(cfg.tolerances.get("s21_max_iter", 200)))
        d = p.to_dict()
        d["device_id"] = sw.device_id
        d["source"] = str(path)
        tio.write_json(out / f"{Path(path).stem}_fit.json", d)
        return sw.device_id, p

    results = _run_items(files, work, cfg.jobs)
    with (out / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["device_id", "f0_ghz", "qi_inv_x1e5", "qe_inv_mag_x1e5", "source"])
        for path, (ok, r) in zip(files, results):
            if ok:
                dev, p = r
                w.writerow([dev, f"{p.f0 / 1e9:.6f}", f"{p.q_int_inv * 1e5:.4f}", f"{p.q_ext_inv_mag * 1e5:.4f}", path])
    nfail = _report_failures("fit-s21", files, results, out)
    log.info("fit-s21: %d of %d sweeps fitted", len(files) - nfail, len(files))
    return EXIT_FAILURES if nfail else EXIT_OK


def _model_curves(fit, table, heat, out: Path):
    n_grid = np.geomspace(1.0, 1e7, 121)
    t_grid = np.geomspace(0.01, 1.5, 121)
    power_series, temp_series = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TemperatureRangeWarning)
        for dev in sorted(fit.devices):
            m = fit.model(dev)
            tls = m.q_int_inv(n_grid, np.full_like(n_grid, 0.01))
            cols = {"n_bar": n_grid, "qi_inv_model": tls}
            if heat is not None:
                cols["qi_inv_model_heating"] = m.q_int_inv(n_grid, heat.effective_temperature(n_grid, 0.01))
            tio.write_curve_csv(out / f"curve_power_{dev}.csv", cols)
            tt = m.q_int_inv(1.0, t_grid)
            tio.write_curve_csv(out / f"curve_temperature_{dev}.csv", {"t_kelvin": t_grid, "qi_inv_model": tt})
            power_series.append({"x": n_grid, "y": cols.get("qi_inv_model_heating", tls), "label": dev})
            temp_series.append({"x": t_grid, "y": tt, "label": dev})
    write_svg(out / "loss_vs_power.svg", power_series, title="Model loss vs photon number", xlabel="n_bar",
              ylabel="Qi^-1", xlog=True, ylog=True)
    write_svg(out / "loss_vs_temperature.svg", temp_series, title="Model loss vs temperature", xlabel="T (K)",
              ylabel="Qi^-1", xlog=True, ylog=True)


def cmd_fit_loss(cfg: RunConfig) -> int:
    table, power, temp = _loss_inputs(cfg)
    out = _out_dir(cfg)
    lc = cfg.loss_config()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TemperatureRangeWarning)
        fit = fit_loss_model(power, temp, lc)
    heat = fit.heat_law
    notes = list(fit.warnings)
    terms = {
        "background": "enabled" if cfg.background else "disabled",
        "resonant": "enabled" if cfg.resonant else "disabled",
        "relaxation": cfg.relaxation if cfg.relaxation != "off" else "disabled",
        "quasiparticle": "enabled" if cfg.quasiparticle else "disabled",
        "self_heating": cfg.self_heating if cfg.self_heating != "off" else "disabled",
    }
    report = {
        "tool": f"tlsloss {__version__}",
        "film": tio.film_to_dict(fit.film, heat),
        "terms": terms,
        "chi2": fit.chi2,
        "dof": fit.dof,
        "reduced_chi2": fit.reduced_chi2,
        "converged": bool(fit.fit.converged),
        "degenerate": bool(fit.degenerate),
        "covariance_reliable": not fit.degenerate,
        "warnings": notes,
        "residuals": [
            {"device_id": p.device_id, "n_bar": p.n_bar, "t_bp_kelvin": p.t_bp, "qi_inv": p.q_int_inv,
             "normalized_residual": float(r)}
            for p, r in zip(fit.points, fit.residuals)
        ],
        "config": cfg.to_dict(),
    }
    tio.write_json(out / "report.json", report)
    tio.write_json(out / "model.json", tio.film_to_dict(fit.film, heat))
    card_params = {k: v for k, v in tio.film_to_dict(fit.film).items() if k != "sigmas"}
    (out / "model_card.md").write_text(tio.model_card(card_params, {
        "t0_kelvin": "reference temperature (configuration)",
        "d": "phonon dimensionality (configuration)",
    }))
    _model_curves(fit, table, heat, out)
    for w in notes:
        log.warning("fit-loss: %s", w)
    log.info("fit-loss: chi2/dof = %.3g", fit.reduced_chi2)
    return EXIT_OK


def cmd_thermometry(cfg: RunConfig) -> int:
    table, power, temp = _loss_inputs(cfg)
    if power is None:
        raise ConfigError("inputs.power: thermometry needs a power-sweep table")
    out = _out_dir(cfg)
    if cfg.thermometry_mode == "per-device":
        if temp is None:
            raise ConfigError("inputs.temperature: per-device thermometry fits each device's temperature sweep")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TemperatureRangeWarning)
            fits = fit_device_models(power, temp, cfg.loss_config())
        models = {d: f.model(d) for d, f in fits.items()}
    else:
        if cfg.inputs.get("model"):
            film, _ = tio.film_from_dict(tio.read_json(cfg.inputs["model"]), cfg.inputs["model"])
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TemperatureRangeWarning)
                film = fit_loss_model(power, temp, cfg.loss_config()).film
        models = {d: LossModel(film, row["f_sin"], row["f0_hz"], cfg.relaxation, device_id=d)
                  for d, row in table.items()}
    curves = thermometry(power, models, cfg.bracket_top_kelvin)
    law = fit_self_heating(list(curves.values()), cfg.heat_beta, cfg.fit_beta)
    tio.write_thermometry(out / "thermometry.csv", curves.values())
    n_out = int(sum(c.out_of_range.sum() for c in curves.values()))
    tio.write_json(out / "self_heating.json", {
        "a_kelvin": law.a_coeff, "sigma_a_kelvin": law.sigma_a,
        "beta": law.beta, "sigma_beta": law.sigma_beta, "beta_frozen": not cfg.fit_beta,
        "t_bp_kelvin": law.t_bp, "low_confidence": law.low_confidence,
        "per_device_a_kelvin": law.per_device_a, "out_of_range_points": n_out,
        "config": cfg.to_dict(),
    })
    series = [{"x": c.n_bar, "y": c.t_eff, "label": d, "style": "points"} for d, c in curves.items()]
    n = np.geomspace(1.0, max(float(power.column("n_bar").max()), 10.0), 100)
    series.append({"x": n, "y": law.effective_temperature(n), "label": "fit"})
    write_svg(out / "t_eff_vs_power.svg", series, title="Inferred effective temperature", xlabel="n_bar",
              ylabel="T_eff (K)", xlog=True, ylog=True)
    if n_out:
        log.warning("thermometry: %d points outside the model range", n_out)
    log.info("thermometry: A = %.4g +- %.2g K, beta = %.3g", law.a_coeff, law.sigma_a, law.beta)
    return EXIT_OK


def cmd_ftir(cfg: RunConfig) -> int:
    files = list(cfg.inputs.get("spectra") or [])
    if not files:
        raise ConfigError("ftir needs at least one spectrum file")
    out = _out_dir(cfg)

    def work(path):
        s = tio.read_spectrum(path)
        corrected, peaks, h = analyze_spectrum(
            s, cfg.ftir_degree, window=cfg.ftir_window_cm1, cross_sections=cfg.cross_sections_cm2,
            matrix_density=cfg.matrix_density_cm3,
        )
        stem = Path(path).stem
        tio.write_spectrum(out / f"{stem}_corrected.csv", corrected)
        tio.write_json(out / f"{stem}_ftir.json", {
            "source": str(path), "label": s.label, "thickness_cm": s.thickness,
            "peaks": {k: p.to_dict() for k, p in peaks.items()}, "hydrogen": h.to_dict(),
        })
        return s, h

    results = _run_items(files, work, cfg.jobs)
    rows = []
    for path, (ok, r) in zip(files, results):
        if ok:
            s, h = r
            rows.append((str(path), s.label, s.thickness, h))
    with (out / "comparison.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "label", "thickness_cm", "atomic_h_percent", "atomic_h_percent_sigma", "upper_limit"])
        for path, label, t, h in rows:
            w.writerow([path, label, repr(t), repr(h.atomic_h_percent), repr(h.sigmas["atomic_h_percent"]),
                        h.upper_limit])
        means = {}
        for _, label, _, h in rows:
            means.setdefault(label, []).append(h.atomic_h_percent)
        for label in sorted(means):
            w.writerow([f"mean:{label}", label, "", repr(float(np.mean(means[label]))), "", ""])
        if "as-deposited" in means and "annealed" in means:
            a, b = float(np.mean(means["as-deposited"])), float(np.mean(means["annealed"]))
            w.writerow(["ratio:as-deposited/annealed", "", "", repr(a / b) if b > 0 else "inf", "", ""])
    nfail = _report_failures("ftir", files, results, out)
    return EXIT_FAILURES if nfail else EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    sc_dict = dict(cfg.scenario)
    if cfg.inputs.get("scenario"):
        sc_dict = {**tio.read_json(cfg.inputs["scenario"]), **sc_dict}
    sc_dict["seed"] = cfg.seed
    try:
        scenario = Scenario(**sc_dict)
    except TypeError as exc:
        raise ConfigError(f"scenario: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc
    out = _out_dir(cfg)
    rng = np.random.default_rng(scenario.seed)
    power, temp = synth_loss_data(scenario, rng)
    sweeps = synth_sweeps(scenario, rng) if scenario.sweeps else []
    spectra = synth_spectra(scenario, rng) if scenario.spectra else []

    tio.write_json(out / "scenario.json", scenario.to_dict())
    tio.write_device_table(out / "devices.json", {
        d.device_id: {"f0_hz": d.f0, "f_sin": d.f_sin, "q_ext_inv": d.q_ext_inv} for d in scenario.devices
    })
    tio.write_loss_dataset(out / "loss_power.csv", power)
    tio.write_loss_dataset(out / "loss_temperature.csv", temp)
    if sweeps:
        (out / "sweeps").mkdir(exist_ok=True)
        for sw in sweeps:
            tio.write_sweep(out / "sweeps" / f"{sw.device_id}.csv", sw)
    if spectra:
        (out / "spectra").mkdir(exist_ok=True)
        for s in spectra:
            tio.write_spectrum(out / "spectra" / f"{s.label}_{s.thickness * 1e7:.0f}nm.csv", s)
    pre = scenario.preset
    truth = tio.film_to_dict(film_params(pre), heating_law(pre, scenario.t_bp) if scenario.self_heating else None)
    tio.write_json(out / "truth.json", truth)
    card = {k: getattr(pre, k) for k in ("tan_res", "tan_rel", "t0", "d", "n_c", "q_bg_inv", "heat_a", "heat_beta", "f_sin")}
    (out / "model_card.md").write_text(tio.model_card(card, pre.provenance))
    log.info("simulate: wrote %s bundle to %s", scenario.film, out)
    return EXIT_OK


COMMANDS = {
    "fit-s21": cmd_fit_s21,
    "fit-loss": cmd_fit_loss,
    "thermometry": cmd_thermometry,
    "ftir": cmd_ftir,
    "simulate": cmd_simulate,
}


# ---------------------------------------------------------------- argument parsing

def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="JSON file in the RunConfig schema")
    p.add_argument("--out", default=d, help="output directory")
    p.add_argument("--seed", type=int, default=d, help="unsigned 64-bit RNG seed")
    p.add_argument("--jobs", type=int, default=d, help="parallel work items")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tlsloss", description="TLS loss analysis pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    p = sub.add_parser("fit-s21", parents=[common], help="fit S21 sweeps")
    p.add_argument("sweeps", nargs="*", help="sweep CSV files")
    p.add_argument("--no-normalize", dest="normalize", action="store_false", default=argparse.SUPPRESS)

    def loss_args(q):
        q.add_argument("--power", help="power-sweep loss CSV")
        q.add_argument("--temperature", help="temperature-sweep loss CSV")
        q.add_argument("--devices", help="device table JSON")
        q.add_argument("--relaxation", choices=["full", "powerlaw", "off"], default=argparse.SUPPRESS)
        q.add_argument("--self-heating", dest="self_heating", choices=["off", "fit", "fixed"], default=argparse.SUPPRESS)
        q.add_argument("--power-n-max", dest="power_n_max", type=float, default=argparse.SUPPRESS)

    p = sub.add_parser("fit-loss", parents=[common], help="joint TLS loss fit")
    loss_args(p)

    p = sub.add_parser("thermometry", parents=[common], help="effective temperatures and heating law")
    loss_args(p)
    p.add_argument("--model", help="model JSON written by fit-loss")
    p.add_argument("--mode", dest="thermometry_mode", choices=["shared", "per-device"], default=argparse.SUPPRESS)
    p.add_argument("--fit-beta", dest="fit_beta", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("ftir", parents=[common], help="hydrogen content from FT-IR spectra")
    p.add_argument("spectra", nargs="*", help="spectrum CSV files")

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic dataset bundle")
    p.add_argument("--film", choices=["as-deposited", "annealed"], default=argparse.SUPPRESS)
    p.add_argument("--scenario", help="scenario JSON (Scenario fields)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base = {}
    if getattr(args, "config", None):
        base = tio.read_json(args.config)
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
    cfg = RunConfig.from_dict(base)
    cfg.command = args.command
    for key in ("out", "seed", "jobs"):
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    for key in ("normalize", "relaxation", "self_heating", "power_n_max", "thermometry_mode", "fit_beta"):
        if hasattr(args, key):
            setattr(cfg, key, getattr(args, key))
    inputs = dict(cfg.inputs)
    for role in ("sweeps", "spectra"):
        v = getattr(args, role, None)
        if v:
            inputs[role] = [str(x) for x in v]
    for role in ("power", "temperature", "devices", "model", "scenario"):
        v = getattr(args, role, None)
        if v:
            inputs[role] = str(v)
    cfg.inputs = inputs
    if hasattr(args, "film"):
        cfg.scenario = {**cfg.scenario, "film": args.film}
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg)
    except (ConfigError, tio.SchemaError) as exc:
        parser.print_usage(sys.stderr)
        print(f"tlsloss {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        log.debug("%s", traceback.format_exc())
        print(f"tlsloss {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURES


if __name__ == "__main__":
    sys.exit(main())
