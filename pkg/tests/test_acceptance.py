"""
Acceptance criteria, one test each, at the stated tolerances.

Every test prints a single ``criterion N: PASS|FAIL  <details>`` line; the
lines are also repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from qzbsim import data_path
from qzbsim.cmt import (ThreeModeState, free_evolution, integrate, photon_balance,
                        shg_steady_state, signal_loss)
from qzbsim.counting import (TABLE2_ROWS, DetectorModel, click_probability, effective_gate_rate,
                             simulate_counting, single_photon_extinction)
from qzbsim.noise import (load_budget, per_mode_probability, solve_cavity_rate, solve_fiber_rate,
                          synthesize_counts)
from qzbsim.resonator import external_ratio_for_loss, lorentzian_transmission
from qzbsim.scenario import load_scenario
from qzbsim.zeno import (_at_detuning, alignment_scan, calibrate_coupling, coupling_sweep,
                         detuning_scan, extinction_at, modulation_extinction)

from conftest import TWO_PI, linear_cfg

RESULTS: dict[str, str] = {}


def report(n, checks, t0=None, budget=None):
    """Print and record one line; ``checks`` maps a label to (ok, detail)."""
    parts = []
    ok = True
    for label, (good, detail) in checks.items():
        ok &= bool(good)
        parts.append(f"{label}{'' if good else ' [FAIL]'}: {detail}")
    if t0 is not None:
        dt = time.perf_counter() - t0
        good = budget is None or dt < budget
        ok &= good
        parts.append(f"runtime {dt:.2f} s" + ("" if budget is None else f" (< {budget} s)")
                     + ("" if good else " [FAIL]"))
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  " + "; ".join(parts)
    RESULTS[str(n)] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def calibrated():
    """Shipped scenarios with g re-fitted here to 51.0% quasi-CW extinction at -0.01 nm."""
    cw = load_scenario(data_path("pulsed-pump.scn"))
    g = calibrate_coupling(cw, target=0.510, detuning_nm=-0.01)
    pulses = load_scenario(data_path("signal-pulses.scn"))
    return cw.with_coupling(g=g), pulses.with_coupling(g=g)


def test_criterion_1_extinction_arithmetic():
    t0 = time.perf_counter()
    e1 = 100 * float(modulation_extinction(0.293, 0.381, 0.381))
    e2 = 100 * float(modulation_extinction(0.144, 0.328, 0.381))
    rows = [100 * e for e in single_photon_extinction(TABLE2_ROWS)]
    want = (12.7, 20.6, 12.7)
    report(1, {
        "23.0%": (abs(e1 - 23.0) <= 0.2, f"{e1:.2f}%"),
        "48.2%": (abs(e2 - 48.2) <= 0.2, f"{e2:.2f}%"),
        **{f"table row {i + 1} ({w}%)": (abs(r - w) <= 0.5, f"{r:.2f}%")
           for i, (r, w) in enumerate(zip(rows, want))},
    }, t0, budget=1.0)


def test_criterion_2_lorentzian_oracle():
    t0 = time.perf_counter()
    k0, ke = TWO_PI * 1e9, TWO_PI * 0.25e9
    kappa = k0 + ke
    worst = 0.0
    for x in np.linspace(-5, 5, 21):
        cfg = linear_cfg(k0, ke, detuning=x * kappa)
        tr = integrate(cfg)
        got = tr.p_out[-1] / tr.p_in[-1]
        worst = max(worst, abs(got / lorentzian_transmission(x * kappa, k0, ke) - 1))
    r = external_ratio_for_loss(0.381)
    analytic = 1 - lorentzian_transmission(0.0, k0, r * k0)
    cfg = linear_cfg(k0, r * k0)
    sim = signal_loss(integrate(cfg), (0.75 * cfg.sim.t_end, cfg.sim.t_end))
    report(2, {
        "21 detunings": (worst < 1e-6, f"max rel error {worst:.2e}"),
        "38.1% fit": (abs(analytic - 0.381) < 1e-9 and abs(sim - 0.381) < 1e-6,
                      f"ratio {r:.6f}, analytic {analytic:.9f}, simulated {sim:.9f}"),
    }, t0, budget=10.0)


def test_criterion_3_manley_rowe_and_balance(calibrated):
    t0 = time.perf_counter()
    cw, _ = calibrated
    g = cw.coupling.g
    kappa = cw.signal_mode.kappa
    n = (0.5 * kappa / g) ** 2  # g*sqrt(n) = kappa/2
    t = np.linspace(0.0, 1e4 / kappa, 2001)
    amp = math.sqrt(n)
    y = free_evolution(ThreeModeState(amp, 0.8 * amp * 1j, 0.3 * amp), g, t,
                       delta_c=cw.coupling.delta_c)
    i1 = np.abs(y[:, 0]) ** 2 + np.abs(y[:, 2]) ** 2
    i2 = np.abs(y[:, 1]) ** 2 + np.abs(y[:, 2]) ** 2
    drift = max(np.max(np.abs(i1 / i1[0] - 1)), np.max(np.abs(i2 / i2[0] - 1)))
    bal = photon_balance(integrate(cw))
    worst = max(abs(rhs / lhs - 1) for lhs, rhs in bal.values())
    report(3, {
        "Manley-Rowe 1e4 lifetimes": (drift < 1e-8, f"max drift {drift:.2e}"),
        "flux balance": (worst < 1e-6, f"max rel residual {worst:.2e}"),
    }, t0, budget=30.0)


def test_criterion_4_shg_slope(calibrated):
    t0 = time.perf_counter()
    cw, _ = calibrated
    powers = np.logspace(-4, -2, 10)  # 0.1 to 10 mW
    res = [shg_steady_state(p, cw) for p in powers]
    slope = np.polyfit(np.log10(powers), np.log10([r.sh_power for r in res]), 1)[0]
    report(4, {
        "slope": (abs(slope - 2.0) <= 0.05, f"{slope:.4f}"),
        "undepleted": (all(r.regime_ok for r in res), f"max depletion {max(r.depletion for r in res):.1e}"),
    }, t0, budget=30.0)


def test_criterion_5_qzb_physics(calibrated):
    t0 = time.perf_counter()
    cw, pulses = calibrated
    g_khz = cw.coupling.g / TWO_PI / 1e3
    cal = extinction_at(cw, -0.01)
    pulsed = extinction_at(pulses, -0.01)
    scan = detuning_scan(cw, [0.0, -0.005, -0.01, -0.015, -0.02, -0.03])
    best_det, best_ext = scan.best()
    red = extinction_at(cw, +0.01)
    al = alignment_scan(_at_detuning(pulses, -0.01), [-300e-12, 0.0, 300e-12])
    ext = al.extinction
    collapse = [ext[1] / e if e > 0 else math.inf for e in (ext[0], ext[2])]
    report(5, {
        "calibration": (abs(cal - 0.510) < 1e-3, f"g/2pi {g_khz:.2f} kHz -> {100 * cal:.2f}%"),
        "(a) pulsed in [40,56]%": (0.40 <= pulsed <= 0.56, f"{100 * pulsed:.1f}%"),
        "(b) off-center peak": (best_det != 0.0, f"argmax {best_det:+.3f} nm ({100 * best_ext:.1f}%)"),
        "(c) red negative": (red < 0, f"{100 * red:+.1f}% at +0.01 nm"),
        "(d) 300 ps collapse > 20x": (min(collapse) > 20,
                                      f"{collapse[0]:.1f}x (-300 ps), {collapse[1]:.1f}x (+300 ps)"),
    }, t0, budget=300.0)


def test_criterion_6_interaction_free(calibrated):
    t0 = time.perf_counter()
    _, pulses = calibrated
    cfg = _at_detuning(pulses, -0.01)
    g0 = cfg.coupling.g
    sweep = coupling_sweep(cfg, g0 * np.logspace(-1, 2, 16))
    conv, ext = sweep.sf_conversion, sweep.extinction
    knee = int(np.argmax(conv))
    tail_c, tail_e = conv[knee:], ext[knee:]
    n_past = len(tail_c) - 1
    report(6, {
        "points past knee": (n_past >= 8, f"{n_past} (knee at {sweep.detunings_nm[knee] / 1e3:.0f} kHz)"),
        "conversion decreasing": (bool(np.all(np.diff(tail_c) < 0)),
                                  f"{tail_c[0]:.2e} -> {tail_c[-1]:.2e}"),
        "extinction non-decreasing": (bool(np.all(np.diff(tail_e) >= 0)),
                                      f"{100 * tail_e[0]:.1f}% -> {100 * tail_e[-1]:.1f}%"),
    }, t0, budget=300.0)


def test_criterion_7_noise_budget():
    t0 = time.perf_counter()
    b = load_budget(data_path("table1.budget"))
    worst = 0.0
    for r_f, r_r in [(5.0, 0.0), (23.1, 0.093), (80.0, 0.4), (1.0, 1e-3)]:
        b1, b2 = synthesize_counts(r_f, r_r, b.without_disk, b.with_disk)
        f = solve_fiber_rate(b1)
        r = solve_cavity_rate(f, b2).r_r
        worst = max(worst, abs(f / r_f - 1), abs(r - r_r) / max(r_r, 1.0))
    p1, p2 = b.without_disk.per_gate_noise, b.with_disk.per_gate_noise
    per_mode = per_mode_probability(0.093, b.modes)
    sol = b.solve()
    report(7, {
        "round trip": (worst <= 1e-12, f"max rel error {worst:.1e}"),
        "per-gate totals": (round(p1, 4) == 0.0823 and round(p2, 4) == 0.0885,
                            f"{p1:.5f}, {p2:.5f}"),
        "per mode": (round(per_mode, 5) == 0.00715 and round(per_mode, 4) == 0.0072,
                     f"{per_mode:.4e} over {b.modes.n_modes:g} modes"),
        "R_r residual": (math.isfinite(sol["residual_R_r"]),
                         f"R_f {sol['R_f']:.3f}, R_r {sol['R_r']:.4f}, "
                         f"residual {sol['residual_R_r']:+.4f} vs 0.093"),
    }, t0, budget=1.0)


def test_criterion_8_counting():
    t0 = time.perf_counter()
    det = DetectorModel()
    mu, T, n = 0.16, 0.86, 2_000_000
    a = simulate_counting(mu, T, det, n, seed=2024)
    b = simulate_counting(mu, T, det, n, seed=2024)
    p = click_probability(mu, T, det)
    z = (a.raw_prob - p) / a.std_error
    g_formula = effective_gate_rate(det.gate_source, p, det.blocked_triggers / det.gate_source)
    g_err = a.gate_rate / g_formula - 1
    report(8, {
        "click probability": (abs(z) <= 3, f"{a.raw_prob:.6f} vs {p:.6f} ({z:+.2f} sigma)"),
        "gate rate": (abs(g_err) < 0.01, f"{a.gate_rate:.0f} Hz vs {g_formula:.0f} Hz ({100 * g_err:+.3f}%)"),
        "seed determinism": (a == b and a.meta == b.meta, "bit-exact" if a == b else "differs"),
    }, t0, budget=60.0)
