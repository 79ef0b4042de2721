"""Power-induced loss explained as heating of the TLS bath.

1. Generate an as-deposited bundle with T_eff = T_bp + A n^0.5.
2. Fit the loss model to the low-power and temperature data only.
3. Invert every power-sweep point to an effective temperature.
4. Refit the heating law and rebuild the loss-versus-power curve.

    python demos/self_heating.py [out_dir]
"""
import sys
import warnings
from pathlib import Path

import numpy as np

from tlsloss.inference import LossFitConfig, fit_loss_model, fit_self_heating, thermometry
from tlsloss.plotting import write_svg
from tlsloss.simulate import Scenario, synth_loss_data
from tlsloss.tlsmodel import TemperatureRangeWarning


def main(out):
    out.mkdir(parents=True, exist_ok=True)
    warnings.simplefilter("ignore", TemperatureRangeWarning)
    sc = Scenario("as-deposited", seed=3)
    power, temp = synth_loss_data(sc)
    print(f"generator: A = {sc.preset.heat_a} K, beta = {sc.preset.heat_beta}")

    fit = fit_loss_model(power, temp, LossFitConfig(power_n_max=1e3))
    f = fit.film
    print(f"loss fit: tan_res = {f.tan_res:.3e}, tan_rel = {f.tan_rel:.3e}, n_c = {f.n_c:.1f}, "
          f"chi2/dof = {fit.reduced_chi2:.2f}")

    curves = thermometry(power, {d: fit.model(d) for d in fit.devices})
    law = fit_self_heating(list(curves.values()))
    print(f"heating law: A = {law.a_coeff:.4g} +- {law.sigma_a:.1g} K")
    for dev, c in curves.items():
        i = int(np.argmax(c.n_bar))
        print(f"  device {dev}: T_eff = {c.t_eff[i]:.2f} K at n = {c.n_bar[i]:.0e}")

    # self-consistency: the model at T_eff reproduces the non-monotone data
    m = fit.model("A")
    n = np.geomspace(1, 1e7, 200)
    q = m.q_int_inv(n, law.effective_temperature(n))
    ds = power.for_device("A")
    write_svg(out / "self_heating_loss.svg", [
        {"x": ds.column("n_bar"), "y": ds.column("q_int_inv"), "label": "data A", "style": "points"},
        {"x": n, "y": q, "label": "model at T_eff"},
    ], title="Device A loss vs photon number", xlabel="n_bar", ylabel="Qi^-1", xlog=True, ylog=True)
    write_svg(out / "self_heating_teff.svg", [
        {"x": c.n_bar, "y": c.t_eff, "label": d, "style": "points"} for d, c in curves.items()
    ] + [{"x": n, "y": law.effective_temperature(n), "label": "fit"}],
        title="Inferred effective temperature", xlabel="n_bar", ylabel="T_eff (K)", xlog=True, ylog=True)
    print(f"wrote {out}/self_heating_loss.svg and self_heating_teff.svg")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out"))
