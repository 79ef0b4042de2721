"""Relaxation loss across its two regimes.

Evaluates the full double integral for a 6 GHz resonator and compares it
with the slow-relaxation power law and the fast-relaxation constant.  Writes
a CSV and an SVG next to the script's output directory.

    python demos/relaxation_regimes.py [out_dir]
"""
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from tlsloss.io import write_curve_csv
from tlsloss.plotting import write_svg
from tlsloss.tlsmodel import (
    default_kernel,
    q_rel_inv_full,
    q_rel_inv_high_temperature,
    q_rel_inv_low_temperature,
)

F0 = 6e9


def main(out):
    out.mkdir(parents=True, exist_ok=True)
    T = np.geomspace(0.01, 2.0, 60)
    k = default_kernel(2)
    fast = replace(k, gamma_bar=k.gamma_bar * 1e5)

    full = q_rel_inv_full(T, F0, 1.0, k)
    low = q_rel_inv_low_temperature(T, F0, 1.0, k)
    full_fast = q_rel_inv_full(T, F0, 1.0, fast)
    const = np.full_like(T, q_rel_inv_high_temperature(1.0))

    print("  T (K)    full/power-law   fast/constant")
    for t, a, b, c in zip(T[::10], full[::10], low[::10], full_fast[::10]):
        print(f"  {t:6.3f}   {a / b:12.4f}   {c / const[0]:12.4f}")

    # log-log slope in the slow regime recovers the phonon dimensionality
    for d in (1, 2, 3):
        Ts = np.array([0.05, 0.1, 0.2])
        s = np.polyfit(np.log(Ts), np.log(q_rel_inv_full(Ts, F0, 1.0, default_kernel(d))), 1)[0]
        print(f"  d = {d}: fitted slope {s:.3f}")

    write_curve_csv(out / "relaxation_regimes.csv", {
        "t_kelvin": T, "full": full, "power_law": low, "full_fast": full_fast, "fast_constant": const,
    })
    write_svg(out / "relaxation_regimes.svg", [
        {"x": T, "y": full, "label": "full"},
        {"x": T, "y": low, "label": "power law"},
        {"x": T, "y": full_fast, "label": "full, fast"},
        {"x": T, "y": const, "label": "constant"},
    ], title="Relaxation loss per unit scale", xlabel="T (K)", ylabel="Q^-1", xlog=True, ylog=True)
    print(f"wrote {out}/relaxation_regimes.csv and .svg")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out"))
