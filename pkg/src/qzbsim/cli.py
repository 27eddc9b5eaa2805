"""
Command-line entry point.

Every subcommand writes its CSV result(s) to ``--out`` together with
``<name>.meta.json`` (argv, resolved scenario, seed, versions, wall time)
and, when a scenario is involved, ``resolved.scn``. Failures exit nonzero
with one JSON line on stderr: ``{"error": <category>, "message": ...}``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, data_path
from .counting import (DEFAULT_DARK_PROB, TABLE2_CENTER, TABLE2_OFFRES, TABLE2_ROWS,
                       DetectorModel, center_loss, effective_gate_rate, estimate_probability,
                       simulate_counting, table2_csv)
from .cmt import integrate, shg_steady_state, signal_loss
from .dispersion import (DEFAULT_DISPERSION_FILE, load_dispersion_file, phase_match_search,
                         resonance_comb)
from .resonator import DiskSpec
from .integrator import CONTROLLER_VERSION, IntegrationError
from .noise import ALPHA_CONVENTIONS, load_budget
from .scenario import ScenarioError, load_scenario, serialize_scenario
from .zeno import alignment_scan, analysis_window, detuning_scan, stabilize_sfg

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_INTEGRATION = 4
EXIT_IO = 5
EXIT_DOMAIN = 6

# Published count rates used for the raw/subtracted comparison [Hz]
PUBLISHED_BACKGROUND = 7.12e3
PUBLISHED_ON_RES = (59.20e3, 465.0e3)
PUBLISHED_OFF_RES = (62.88e3, 395.0e3)


class CliError(Exception):
    def __init__(self, category: str, message: str, code: int):
        super().__init__(message)
        self.category = category
        self.code = code


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


class Run:
    """Collects outputs of one subcommand and writes them plus the sidecar."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out = Path(args.out)
        self.files: dict[str, str] = {}
        self.extra: dict = {}
        self.cfg = None
        self.seed = args.seed
        self.t0 = time.perf_counter()

    def config(self):
        if self.cfg is None:
            if not self.args.config:
                raise CliError("usage", f"{self.args.command} needs --config", EXIT_USAGE)
            try:
                cfg = load_scenario(self.args.config)
            except ScenarioError as exc:
                raise CliError("config", str(exc), EXIT_CONFIG)
            except OSError as exc:
                raise CliError("io", str(exc), EXIT_IO)
            if self.seed is not None:
                cfg = replace(cfg, seed=self.seed)
            self.cfg = cfg
            self.seed = cfg.seed
        return self.cfg

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def finish(self) -> None:
        try:
            self.out.mkdir(parents=True, exist_ok=True)
            for name, text in self.files.items():
                (self.out / name).write_text(text, encoding="utf-8")
            resolved = None
            if self.cfg is not None:
                resolved = serialize_scenario(self.cfg)
                (self.out / "resolved.scn").write_text(resolved, encoding="utf-8")
            meta = {
                "command": self.args.command,
                "argv": self.argv,
                "seed": self.seed,
                "version": __version__,
                "integrator": CONTROLLER_VERSION,
                "numpy": np.__version__,
                "python": sys.version.split()[0],
                "timestamp": datetime.now(timezone.utc).isoformat(),
                "wall_time_s": time.perf_counter() - self.t0,
                "outputs": sorted(self.files),
                "resolved_config": resolved,
                **self.extra,
            }
            path = self.out / f"{self.args.command}.meta.json"
            path.write_text(json.dumps(meta, indent=2, default=_json_default) + "\n",
                            encoding="utf-8")
        except OSError as exc:
            raise CliError("io", str(exc), EXIT_IO)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


# --------------------------------------------------------------------------
# subcommands

def cmd_simulate(run: Run) -> None:
    cfg = run.config()
    tr = integrate(cfg)
    run.add("trace.csv", _csv(
        ["t_s", "p_in_w", "p_out_w", "n_signal", "n_pump", "n_sf", "sf_flux_hz"],
        zip(tr.t, tr.p_in, tr.p_out, tr.n_a, tr.n_b, tr.n_c, tr.sf_flux)))
    window = analysis_window(cfg)
    summary = {"window_s": list(window), "integrator_steps": tr.meta["n_steps"]}
    if tr.cum_in[-1] > 0:
        summary["signal_loss"] = signal_loss(tr, window)
    run.extra["summary"] = summary
    print(json.dumps(summary))


def cmd_scan(run: Run) -> None:
    cfg = run.config()
    rep = detuning_scan(cfg, run.args.detunings, pump_on=not run.args.pump_off,
                        jobs=run.args.jobs)
    run.add("extinction.csv", rep.to_csv())
    run.extra["reference_loss"] = rep.reference_loss
    for d, e in zip(rep.detunings_nm, rep.extinction):
        print(f"{d:+.4f} nm  extinction {e:+.4f}")


def cmd_align(run: Run) -> None:
    cfg = run.config()
    offsets = [o * 1e-12 for o in run.args.offsets]
    rep = alignment_scan(cfg, offsets, jobs=run.args.jobs)
    run.add("alignment.csv", rep.to_csv(index_name="offset_ps"))
    run.extra["reference_loss"] = rep.reference_loss
    for o, e in zip(rep.detunings_nm, rep.extinction):
        print(f"{o:+8.1f} ps  extinction {e:+.4f}")


def cmd_shg(run: Run) -> None:
    cfg = run.config()
    powers = [p * 1e-3 for p in run.args.powers]
    res = [shg_steady_state(p, cfg) for p in powers]
    run.add("shg.csv", _csv(["pump_power_w", "sh_power_w", "depletion", "regime_ok"],
                            [(r.pump_power, r.sh_power, r.depletion, r.regime_ok) for r in res]))
    pos = [(r.pump_power, r.sh_power) for r in res if r.pump_power > 0 and r.sh_power > 0]
    if len(pos) >= 2:
        x, y = np.log10(np.array(pos)).T
        slope = float(np.polyfit(x, y, 1)[0])
        run.extra["loglog_slope"] = slope
        print(f"log-log slope {slope:.4f}")
    run.extra["regime_ok"] = all(r.regime_ok for r in res)


def cmd_stabilize(run: Run) -> None:
    cfg = run.config()
    res = stabilize_sfg(cfg, n_steps=run.args.steps, enabled=not run.args.disable)
    run.add("stabilize.csv", _csv(
        ["t_s", "laser_nm", "resonance_nm", "residual_pm", "pump_residual_pm"],
        zip(res.t, res.laser * 1e9, res.resonance * 1e9, res.residual * 1e12,
            res.pump_residual * 1e12)))
    run.extra.update(converged=res.converged, steps_to_converge=res.steps_to_converge,
                     tolerance_pm=res.tolerance * 1e12)
    print(f"converged={res.converged} steps={res.steps_to_converge} "
          f"final residual {res.final_residual * 1e12:.3f} pm")


def cmd_noise(run: Run) -> None:
    try:
        budget = load_budget(run.args.budget)
    except OSError as exc:
        raise CliError("io", str(exc), EXIT_IO)
    except ValueError as exc:
        raise CliError("config", str(exc), EXIT_CONFIG)
    first = budget.with_disk.alpha_convention
    order = [first] + [c for c in ALPHA_CONVENTIONS if c != first]
    rows = []
    header = ["alpha_convention", "per_gate_without_disk", "per_gate_with_disk", "R_f", "R_r",
              "consistent", "n_modes", "per_mode_probability", "reference_R_r",
              "residual_R_r"]
    for conv in order:
        s = budget.with_convention(conv).solve()
        rows.append([s["alpha_convention"], s["per_gate_without_disk"], s["per_gate_with_disk"],
                     s["R_f"], s["R_r"], s["consistent"], s["n_modes"],
                     s["per_mode_probability"], s.get("reference_R_r", math.nan),
                     s.get("residual_R_r", math.nan)])
    run.add("noise.csv", _csv(header, rows))
    main_row = budget.solve()
    run.extra["budget_file"] = str(run.args.budget)
    run.extra["result"] = main_row
    print(f"per-gate noise without disk {main_row['per_gate_without_disk']:.4f}, "
          f"with disk {main_row['per_gate_with_disk']:.4f}")
    print(f"R_f = {main_row['R_f']:.4g} /m/W per gate   R_r = {main_row['R_r']:.4g} per gate "
          f"({'consistent' if main_row['consistent'] else 'INCONSISTENT: negative'})")
    print(f"modes = {main_row['n_modes']:.4g}   per-mode probability "
          f"{main_row['per_mode_probability']:.4g}")
    if "reference_R_r" in main_row:
        print(f"residual vs reference R_r {main_row['reference_R_r']:.3g}: "
              f"{main_row['residual_R_r']:+.4g} "
              f"(reference per mode {main_row['per_mode_reference']:.4g})")


def cmd_counting(run: Run) -> None:
    a = run.args
    det = DetectorModel(eta_q=a.eta_q, dead_time=a.dead_time_us * 1e-6, dark_prob=a.dark_prob,
                        gate_source=a.trigger_mhz * 1e6)
    seed = 0 if run.seed is None else run.seed
    run.seed = seed
    r = simulate_counting(a.mu, a.transmission, det, a.pulses, seed=seed)
    analytic_gate = effective_gate_rate(det.gate_source, r.meta["click_probability"],
                                        det.dead_time)
    run.add("counting.csv", _csv(
        ["n_pulses", "n_gates", "n_detections", "gate_rate_hz", "detect_rate_hz", "raw_prob",
         "bg_subtracted_prob", "std_error", "click_probability", "analytic_gate_rate_hz"],
        [(r.n_pulses, r.n_gates, r.n_detections, r.gate_rate, r.detect_rate, r.raw_prob,
          r.bg_subtracted_prob, r.std_error, r.meta["click_probability"], analytic_gate)]))
    run.add("table2.csv", table2_csv(TABLE2_ROWS))
    est = []
    for label, (d, g) in (("on_resonance", PUBLISHED_ON_RES), ("off_resonance", PUBLISHED_OFF_RES)):
        e = estimate_probability(d, PUBLISHED_BACKGROUND, g)
        est.append((label, d, PUBLISHED_BACKGROUND, g, e.raw, e.value))
    run.add("estimates.csv", _csv(
        ["case", "detect_rate_hz", "background_rate_hz", "gate_rate_hz", "raw_prob",
         "bg_subtracted_prob"], est))
    run.extra["prng"] = r.meta["prng"]
    run.extra["center_loss"] = center_loss(TABLE2_CENTER, TABLE2_OFFRES)
    print(f"p = {r.meta['click_probability']:.6g}  measured {r.raw_prob:.6g} "
          f"+- {r.std_error:.2g}  gate rate {r.gate_rate:.6g} Hz (analytic {analytic_gate:.6g})")


def cmd_phasematch(run: Run) -> None:
    a = run.args
    disk = None
    if a.config:
        disk = run.config().disk
    try:
        model = load_dispersion_file(a.dispersion or DEFAULT_DISPERSION_FILE,
                                     film_thickness=disk.thickness if disk else 200e-9)
    except OSError as exc:
        raise CliError("io", str(exc), EXIT_IO)
    if disk is None:
        disk = DiskSpec(radius=20e-6, thickness=200e-9)
    lo, hi = (x * 1e-9 for x in a.band)
    te = resonance_comb(disk, model, "TE", (lo, hi))
    tm = resonance_comb(disk, model, "TM", (lo / 2, hi / 2))
    cands = phase_match_search(te, tm)[: a.top]
    run.add("phasematch.csv", _csv(
        ["m_p", "m_sh", "lambda_p_nm", "lambda_sh_nm", "mismatch_rad_s", "delta_c_ghz"],
        [(c.m_p, c.m_sh, c.lambda_p * 1e9, c.lambda_sh * 1e9, c.mismatch,
          c.delta_c / (2 * math.pi) / 1e9) for c in cands]))
    run.extra["dispersion"] = model.name
    for c in cands[:5]:
        print(f"m={c.m_p}/{c.m_sh}  {c.lambda_p * 1e9:.3f} nm -> {c.lambda_sh * 1e9:.3f} nm  "
              f"delta_c/2pi = {c.delta_c / (2 * math.pi) / 1e9:+.2f} GHz")


COMMANDS = {
    "simulate": cmd_simulate,
    "scan": cmd_scan,
    "align": cmd_align,
    "shg": cmd_shg,
    "stabilize": cmd_stabilize,
    "noise": cmd_noise,
    "counting": cmd_counting,
    "phasematch": cmd_phasematch,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="scenario file (.scn)")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--jobs", type=int, default=None,
                        help="worker processes for scans (default: $QZBSIM_JOBS or 1)")

    p = argparse.ArgumentParser(prog="qzbsim", description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=f"qzbsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sub.add_parser("simulate", parents=[common], help="integrate one scenario, write the trace")
    s = sub.add_parser("scan", parents=[common], help="extinction vs signal detuning")
    s.add_argument("--detunings", type=_float_list, default=[0.0, -0.01, -0.02],
                   metavar="LIST", help="signal detunings in nm, negative is blue")
    s.add_argument("--pump-off", action="store_true", help="control scan with the pump off")
    s = sub.add_parser("align", parents=[common], help="extinction vs pump-signal delay")
    s.add_argument("--offsets", type=_float_list, default=[-300.0, 0.0, 300.0], metavar="LIST",
                   help="signal delays in ps")
    s = sub.add_parser("shg", parents=[common], help="second-harmonic power vs pump power")
    s.add_argument("--powers", type=_float_list,
                   default=list(np.round(np.logspace(-1, 1, 10), 6)), metavar="LIST",
                   help="CW pump powers in mW")
    s = sub.add_parser("stabilize", parents=[common], help="thermal tracking controller")
    s.add_argument("--steps", type=int, default=6000)
    s.add_argument("--disable", action="store_true", help="run with the controller off")
    s = sub.add_parser("noise", parents=[common], help="noise-photon budget")
    s.add_argument("--budget", metavar="PATH", default=data_path("table1.budget"))
    s = sub.add_parser("counting", parents=[common], help="gated counting Monte Carlo")
    s.add_argument("--mu", type=float, default=0.16, help="mean photons per pulse")
    s.add_argument("--transmission", type=float, default=0.86, help="path transmission")
    s.add_argument("--eta-q", type=float, default=0.10)
    s.add_argument("--dead-time-us", type=float, default=10.0)
    s.add_argument("--dark-prob", type=float, default=DEFAULT_DARK_PROB)
    s.add_argument("--trigger-mhz", type=float, default=1.0)
    s.add_argument("--pulses", type=int, default=2_000_000)
    s = sub.add_parser("phasematch", parents=[common], help="resonance combs and SHG pairs")
    s.add_argument("--dispersion", metavar="PATH", default=None)
    s.add_argument("--band", type=_float_list, default=[1500.0, 1600.0], metavar="LO,HI",
                   help="telecom band in nm")
    s.add_argument("--top", type=int, default=20)
    return p


def _fail(category: str, message: str, code: int) -> int:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)  # exits 2 with usage on bad input
    run = Run(args, argv)
    try:
        COMMANDS[args.command](run)
        run.finish()
    except CliError as exc:
        return _fail(exc.category, str(exc), exc.code)
    except ScenarioError as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    except IntegrationError as exc:
        return _fail("integration", str(exc), EXIT_INTEGRATION)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    except ValueError as exc:
        return _fail("domain", str(exc), EXIT_DOMAIN)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
