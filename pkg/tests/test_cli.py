import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from tlsloss import io as tio
from tlsloss.cli import RunConfig, build_parser, main
from tlsloss.response import NoiseSpec, ResonatorParams, synth_sweep


def _run(*argv):
    return main([str(a) for a in argv])


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("as-dep")
    assert _run("simulate", "--seed", 7, "--out", out, "--film", "as-deposited") == 0
    return out


@pytest.fixture(scope="module")
def annealed_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("ann")
    assert _run("simulate", "--seed", 8, "--out", out, "--film", "annealed") == 0
    return out


def _tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(Path(root).rglob("*")) if p.is_file()}


# ---------------------------------------------------------------- simulate

def test_simulate_is_byte_identical(bundle, tmp_path):
    again = tmp_path / "again"
    assert _run("simulate", "--seed", 7, "--out", again, "--film", "as-deposited") == 0
    assert _tree_bytes(again) == _tree_bytes(bundle)


def test_simulate_layout(bundle):
    names = set(_tree_bytes(bundle))
    for f in ("scenario.json", "devices.json", "loss_power.csv", "loss_temperature.csv", "truth.json", "model_card.md"):
        assert f in names
    assert len([n for n in names if n.startswith("sweeps/") and n.endswith(".csv")]) == 5
    assert len([n for n in names if n.startswith("spectra/") and n.endswith(".csv")]) == 4


def test_simulated_files_parse(bundle):
    table = tio.read_device_table(bundle / "devices.json")
    assert len(tio.read_loss_dataset(bundle / "loss_power.csv", table)) == 5 * 29
    tio.read_sweep(bundle / "sweeps" / "A.csv")
    for p in (bundle / "spectra").glob("*.csv"):
        tio.read_spectrum(p)


def _power_curve(root, dev):
    table = tio.read_device_table(root / "devices.json")
    ds = tio.read_loss_dataset(root / "loss_power.csv", table).for_device(dev)
    return ds.column("n_bar"), ds.column("q_int_inv")


def test_as_deposited_loss_has_minimum(bundle):
    n, q = _power_curve(bundle, "A")
    i = int(np.argmin(q))
    assert 1e3 <= n[i] <= 1e6 and q[-1] > 2 * q[i]


def test_annealed_loss_saturates(annealed_bundle):
    n, q = _power_curve(annealed_bundle, "A")
    truth = json.loads((annealed_bundle / "truth.json").read_text())
    assert q[-1] < q[0]
    assert "self_heating" not in truth or truth["self_heating"]["a_kelvin"] == 0


def test_loss_scales_with_participation(bundle):
    table = tio.read_device_table(bundle / "devices.json")
    low = [float(np.median(_power_curve(bundle, d)[1][:3])) for d in "ABCDE"]
    assert len(set(low)) == 5
    fs = [table[d]["f_sin"] for d in "ABCDE"]
    slope, icpt = np.polyfit(fs, low, 1)
    pred = np.polyval([slope, icpt], fs)
    assert np.max(np.abs(pred - low) / np.array(low)) < 0.05


def test_simulate_requires_seed(tmp_path):
    assert _run("simulate", "--out", tmp_path / "x") == 2
    assert not (tmp_path / "x" / "scenario.json").exists()


def test_simulate_rejects_bad_scenario_before_writing(tmp_path):
    sc = tmp_path / "sc.json"
    sc.write_text(json.dumps({"film": "crystalline"}))
    assert _run("simulate", "--seed", 1, "--out", tmp_path / "x", "--scenario", sc) == 2
    assert not (tmp_path / "x").exists() or not any((tmp_path / "x").iterdir())


# ---------------------------------------------------------------- fit-s21

def test_fit_s21_ten_sweeps(tmp_path):
    files = []
    for i in range(10):
        p = ResonatorParams.from_internal(5e9 + i * 1e8, 1e-5 * (i + 1), 1e-4)
        files.append(tio.write_sweep(tmp_path / f"s{i}.csv", synth_sweep(p, noise=NoiseSpec(1e-3, i), device_id=f"d{i}")))
    assert _run("fit-s21", *files, "--out", tmp_path / "o", "--jobs", 3) == 0
    rows = _rows(tmp_path / "o" / "summary.csv")
    assert [r["device_id"] for r in rows] == [f"d{i}" for i in range(10)]
    assert len(list((tmp_path / "o").glob("*_fit.json"))) == 10


def test_fit_s21_no_input(tmp_path):
    assert _run("fit-s21", "--out", tmp_path / "o") != 0


def test_fit_s21_isolates_corrupt_file(bundle, tmp_path):
    src = sorted((bundle / "sweeps").glob("*.csv"))
    files = []
    for p in src:
        shutil.copy(p, tmp_path / p.name)
        shutil.copy(p.with_suffix(".json"), tmp_path / p.with_suffix(".json").name)
        files.append(tmp_path / p.name)
    files[2].write_text("freq_hz,re_s21,im_s21\n1,oops,0\n")
    assert _run("fit-s21", *files, "--out", tmp_path / "o") == 1
    assert len(list((tmp_path / "o").glob("*_fit.json"))) == 4
    errs = json.loads((tmp_path / "o" / "errors.json").read_text())
    assert len(errs) == 1 and errs[0]["input"].endswith(files[2].name) and "re_s21" in errs[0]["error"]


def test_fit_s21_recovers_table_values(bundle, tmp_path):
    assert _run("fit-s21", *sorted((bundle / "sweeps").glob("*.csv")), "--out", tmp_path / "o") == 0
    rows = {r["device_id"]: r for r in _rows(tmp_path / "o" / "summary.csv")}
    assert float(rows["A"]["qi_inv_x1e5"]) == pytest.approx(18.4, rel=0.02)
    assert float(rows["E"]["f0_ghz"]) == pytest.approx(6.480, rel=1e-6)


# ---------------------------------------------------------------- fit-loss

def _loss_args(root):
    return ["--power", root / "loss_power.csv", "--temperature", root / "loss_temperature.csv",
            "--devices", root / "devices.json"]


def test_fit_loss_round_trip(bundle, tmp_path):
    assert _run("fit-loss", *_loss_args(bundle), "--self-heating", "fit", "--power-n-max", "1e7",
                "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["film"]["tan_delta_res"] == pytest.approx(1.4e-3, rel=0.05)
    assert rep["film"]["tan_delta_rel"] == pytest.approx(3.4e-3, rel=0.05)
    assert rep["config"]["self_heating"] == "fit"
    assert RunConfig.from_dict(rep["config"]).to_dict() == rep["config"]
    for f in ("model.json", "model_card.md", "loss_vs_power.svg", "curve_power_A.csv", "curve_temperature_E.csv"):
        assert (tmp_path / f).exists()


def test_fit_loss_relaxation_disabled(annealed_bundle, tmp_path):
    assert _run("fit-loss", *_loss_args(annealed_bundle), "--relaxation", "off", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["terms"]["relaxation"] == "disabled"
    assert rep["film"]["tan_delta_rel"] == 0.0


def test_fit_loss_missing_temperature_warns(bundle, tmp_path):
    args = ["--power", bundle / "loss_power.csv", "--devices", bundle / "devices.json"]
    assert _run("fit-loss", *args, "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert any("temperature" in w for w in rep["warnings"])


def test_fit_loss_needs_device_table(bundle, tmp_path):
    assert _run("fit-loss", "--power", bundle / "loss_power.csv", "--out", tmp_path) == 2


# ---------------------------------------------------------------- thermometry

def test_thermometry_round_trip(bundle, tmp_path):
    assert _run("fit-loss", *_loss_args(bundle), "--out", tmp_path / "fit") == 0
    assert _run("thermometry", *_loss_args(bundle), "--model", tmp_path / "fit" / "model.json",
                "--out", tmp_path / "th") == 0
    law = json.loads((tmp_path / "th" / "self_heating.json").read_text())
    assert law["a_kelvin"] == pytest.approx(7e-4, rel=0.02)
    assert law["beta"] == 0.5 and law["beta_frozen"]
    rows = _rows(tmp_path / "th" / "thermometry.csv")
    top = max((r for r in rows if r["device_id"] == "A"), key=lambda r: float(r["n_bar"]))
    assert float(top["t_eff_kelvin"]) > 2.0


def test_thermometry_annealed_heating_consistent_with_zero(annealed_bundle, tmp_path):
    assert _run("thermometry", *_loss_args(annealed_bundle), "--out", tmp_path) == 0
    law = json.loads((tmp_path / "self_heating.json").read_text())
    assert abs(law["a_kelvin"]) < 2 * law["sigma_a_kelvin"]


def test_thermometry_noiseless_annealed_at_base(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": {"film": "annealed", "loss_noise": 0.0, "sweeps": False, "spectra": False}}))
    assert _run("simulate", "--config", cfg, "--seed", 2, "--out", tmp_path / "b") == 0
    assert _run("thermometry", *_loss_args(tmp_path / "b"), "--out", tmp_path / "th") == 0
    t = np.array([float(r["t_eff_kelvin"]) for r in _rows(tmp_path / "th" / "thermometry.csv")])
    np.testing.assert_allclose(t, 0.01, atol=1e-3)
    law = json.loads((tmp_path / "th" / "self_heating.json").read_text())
    assert law["a_kelvin"] < 1e-6


def test_thermometry_per_device_mode(bundle, tmp_path):
    assert _run("thermometry", *_loss_args(bundle), "--mode", "per-device", "--out", tmp_path) == 0
    law = json.loads((tmp_path / "self_heating.json").read_text())
    assert set(law["per_device_a_kelvin"]) == set("ABCDE")


# ---------------------------------------------------------------- ftir

def test_ftir_thickness_invariance(bundle, tmp_path):
    files = sorted((bundle / "spectra").glob("*.csv"))
    assert _run("ftir", *files, "--out", tmp_path) == 0
    rows = [r for r in _rows(tmp_path / "comparison.csv") if not r["row"].startswith(("mean:", "ratio:"))]
    h = np.array([float(r["atomic_h_percent"]) for r in rows])
    assert len(h) == 4 and np.ptp(h) / h.mean() < 0.02


def test_ftir_comparison_has_ratio_row(bundle, annealed_bundle, tmp_path):
    files = sorted((bundle / "spectra").glob("*.csv")) + sorted((annealed_bundle / "spectra").glob("*.csv"))
    assert _run("ftir", *files, "--out", tmp_path) == 0
    rows = {r["row"]: r for r in _rows(tmp_path / "comparison.csv")}
    assert float(rows["ratio:as-deposited/annealed"]["atomic_h_percent"]) > 10


def test_ftir_null_peaks_are_upper_limits(tmp_path):
    from tlsloss.ftir import synthetic_spectrum

    p = tio.write_spectrum(tmp_path / "null.csv", synthetic_spectrum([], 5e-5, "annealed", noise=1e-4, seed=1))
    assert _run("ftir", p, "--out", tmp_path / "o") == 0
    res = json.loads((tmp_path / "o" / "null_ftir.json").read_text())
    assert res["hydrogen"]["upper_limit"]
    assert all(pk["upper_limit"] for pk in res["peaks"].values())


# ---------------------------------------------------------------- config

def test_config_file_and_unknown_keys(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert _run("simulate", "--config", cfg, "--seed", 1, "--out", tmp_path / "o") == 2


def test_config_seed_from_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 3, "scenario": {"sweeps": False, "spectra": False}}))
    assert _run("simulate", "--config", cfg, "--out", tmp_path / "o") == 0
    assert json.loads((tmp_path / "o" / "scenario.json").read_text())["seed"] == 3
    assert not (tmp_path / "o" / "sweeps").exists()


def test_flags_accepted_after_subcommand():
    args = build_parser().parse_args(["fit-s21", "a.csv", "--jobs", "4", "--out", "x"])
    assert args.jobs == 4 and args.out == "x"
