import numpy as np
import pytest

from tlsloss.presets import AS_DEPOSITED, FILMS, TABLE_A1
from tlsloss.response import fit_s21
from tlsloss.simulate import (
    DEFAULT_POWER_GRID,
    DeviceSpec,
    Scenario,
    preset_devices,
    synth_loss_data,
    synth_spectra,
    synth_sweeps,
)


def test_preset_devices_follow_table():
    devs = preset_devices("annealed")
    assert [d.device_id for d in devs] == list("ABCDE")
    assert [d.f0 for d in devs] == [r.f0_hz for r in TABLE_A1["annealed"]]


def test_grids_and_sizes():
    power, temp = synth_loss_data(Scenario(seed=0))
    assert len(power) == 5 * len(DEFAULT_POWER_GRID)
    assert temp.sweep_kind == "temperature" and len(temp) == 5 * 25
    assert DEFAULT_POWER_GRID[0] == 1.0 and DEFAULT_POWER_GRID[-1] == pytest.approx(1e7)


def test_seed_determinism():
    a = synth_loss_data(Scenario(seed=4))[0].column("q_int_inv")
    b = synth_loss_data(Scenario(seed=4))[0].column("q_int_inv")
    c = synth_loss_data(Scenario(seed=5))[0].column("q_int_inv")
    assert a.tobytes() == b.tobytes() and a.tobytes() != c.tobytes()


def test_noise_level_matches_sigma():
    clean = synth_loss_data(Scenario(seed=1, loss_noise=0.0))[0].column("q_int_inv")
    noisy = synth_loss_data(Scenario(seed=1, loss_noise=0.01))[0]
    z = (noisy.column("q_int_inv") - clean) / noisy.column("sigma")
    assert abs(z.mean()) < 0.3 and 0.8 < z.std() < 1.2


def test_linear_in_participation_without_background():
    # a shared f0 leaves F_SiN as the only difference between devices
    devs = [DeviceSpec(k, 6e9, f, 1e-4) for k, f in zip("ABCDE", (0.12, 0.1, 0.08, 0.05, 0.012))]
    sc = Scenario(seed=0, devices=devs, loss_noise=0.0, overrides={"q_bg_inv": 0.0})
    power, _ = synth_loss_data(sc)
    per = {d.device_id: power.for_device(d.device_id).column("q_int_inv") / d.f_sin for d in sc.devices}
    ref = per["A"]
    for v in per.values():
        np.testing.assert_allclose(v, ref, rtol=1e-12)


def test_sweeps_fit_back_to_table():
    sc = Scenario("as-deposited", seed=3)
    for sw, row in zip(synth_sweeps(sc), TABLE_A1["as-deposited"]):
        p = fit_s21(sw)
        assert p.q_int_inv == pytest.approx(row.q_int_inv, rel=0.05)
        assert sw.drive_detuning == 1.5e6 and sw.drive_power_incident > 0


def test_spectra_thicknesses():
    s = synth_spectra(Scenario("annealed", seed=0))
    assert [x.thickness for x in s] == [8e-5, 7e-5, 6e-5, 5e-5]
    assert {x.label for x in s} == {"annealed"}


@pytest.mark.parametrize("kw", [
    {"film": "glass"},
    {"devices": []},
    {"loss_noise": -1.0},
    {"seed": -2},
    {"overrides": {"nonsense": 1}},
    {"devices": [DeviceSpec("A", 6e9, 0.1, 1e-4), DeviceSpec("A", 6e9, 0.1, 1e-4)]},
])
def test_invalid_scenarios(kw):
    with pytest.raises(ValueError):
        Scenario(**kw)


def test_presets_registered():
    assert FILMS["as-deposited"] is AS_DEPOSITED
    assert Scenario(overrides={"tan_res": 1e-3}).preset.tan_res == 1e-3
