"""Fit the nonlinear rate g to the quasi-CW extinction anchor and optionally freeze it.

    python3 scripts/calibrate_coupling.py            # print the fitted g
    python3 scripts/calibrate_coupling.py --write    # also rewrite the shipped scenarios
"""

import argparse
import math
import re
from pathlib import Path

from qzbsim import data_path
from qzbsim.scenario import load_scenario
from qzbsim.zeno import calibrate_coupling, extinction_at

SCENARIOS = ("pulsed-pump.scn", "signal-pulses.scn")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--target", type=float, default=0.510)
    ap.add_argument("--detuning-nm", type=float, default=-0.01)
    ap.add_argument("--write", action="store_true")
    args = ap.parse_args()

    cfg = load_scenario(data_path("pulsed-pump.scn"))
    g = calibrate_coupling(cfg, args.target, args.detuning_nm)
    g_khz = g / (2 * math.pi) / 1e3
    check = extinction_at(cfg.with_coupling(g=g), args.detuning_nm)
    print(f"g/2pi = {g_khz:.6g} kHz  -> extinction {check:.4f} at {args.detuning_nm} nm")

    if args.write:
        for name in SCENARIOS:
            path = Path(data_path(name))
            text = re.sub(r"(?m)^coupling\.g_khz = .*$", f"coupling.g_khz = {g_khz:.6g}",
                          path.read_text())
            path.write_text(text)
            print(f"wrote {path}")


if __name__ == "__main__":
    main()
