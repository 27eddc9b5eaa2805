"""Regenerate every table and figure dataset into one directory.

    python3 scripts/reproduce_all.py --out results [--jobs 4]

Each dataset gets its own subdirectory with the CSV and the metadata
sidecar written by the ``qzbsim`` command line. The coupling sweep has no
subcommand and is written here directly.
"""

import argparse
import json
import math
from pathlib import Path

import numpy as np

from qzbsim import __version__, data_path
from qzbsim.cli import main as cli
from qzbsim.scenario import load_scenario
from qzbsim.zeno import _at_detuning, coupling_sweep

QUASI_CW = str(data_path("pulsed-pump.scn"))
PULSES = str(data_path("signal-pulses.scn"))
BLUE_SCAN = "0.01,0.005,0,-0.005,-0.01,-0.015,-0.02,-0.025,-0.03"


def run(out: Path, name: str, argv: list[str]) -> None:
    code = cli(argv + ["--out", str(out / name)])
    if code:
        raise SystemExit(f"{name}: qzbsim exited with {code}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--jobs", default="1")
    args = ap.parse_args()
    out = Path(args.out)
    j = ["--jobs", args.jobs]

    run(out, "scan_quasi_cw", ["scan", "--config", QUASI_CW, "--detunings=" + BLUE_SCAN, *j])
    run(out, "scan_quasi_cw_pump_off", ["scan", "--config", QUASI_CW, "--detunings=" + BLUE_SCAN,
                                        "--pump-off", *j])
    run(out, "scan_pulsed", ["scan", "--config", PULSES, "--detunings=" + BLUE_SCAN, *j])
    run(out, "alignment", ["align", "--config", PULSES,
                           "--offsets=" + ",".join(str(o) for o in range(-400, 401, 50)), *j])
    run(out, "shg", ["shg", "--config", QUASI_CW])
    run(out, "stabilize", ["stabilize", "--config", QUASI_CW])
    run(out, "stabilize_off", ["stabilize", "--config", QUASI_CW, "--disable"])
    run(out, "noise", ["noise"])
    run(out, "counting", ["counting"])
    run(out, "phasematch", ["phasematch"])

    cfg = _at_detuning(load_scenario(PULSES), -0.01)
    g0 = cfg.coupling.g
    rep = coupling_sweep(cfg, g0 * np.logspace(-1, 2, 16), jobs=int(args.jobs))
    sweep_dir = out / "coupling_sweep"
    sweep_dir.mkdir(parents=True, exist_ok=True)
    (sweep_dir / "coupling_sweep.csv").write_text(
        rep.to_csv(index_name="g_over_2pi_hz", include_conversion=True), encoding="utf-8")
    (sweep_dir / "coupling_sweep.meta.json").write_text(json.dumps({
        "version": __version__, "scenario": PULSES, "detuning_nm": -0.01,
        "g_cal_over_2pi_hz": g0 / (2 * math.pi), "g_multiples": "logspace(-1, 2, 16)",
    }, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out}/")


if __name__ == "__main__":
    main()
