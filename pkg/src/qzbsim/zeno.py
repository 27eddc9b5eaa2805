"""
Experiment-level analysis: extinction metric, detuning and alignment scans,
coupling calibration, thermal drift and the resonance-tracking controller.

Extinction at a signal detuning Δ is

    (loss without pump(Δ) - loss with pump(Δ)) / reference loss

where the reference is always the pump-off loss at zero detuning. Losses
are taken over an analysis window: for a quasi-CW signal (much longer than
the pump) the pump FWHM around the pump peak, for a pulsed signal the
whole signal pulse (±5σ) that meets the pump.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .cmt import IntegrationError, integrate, sf_conversion_fraction, signal_loss
from .integrator import integrate_dopri
from .resonator import detuning_nm_to_rad
from .scenario import TRUNCATE_SIGMA, ScenarioConfig, ThermalModel

__all__ = [
    "ExtinctionReport",
    "ThermalModel",
    "modulation_extinction",
    "analysis_window",
    "is_quasi_cw",
    "point_losses",
    "detuning_scan",
    "alignment_scan",
    "coupling_sweep",
    "calibrate_coupling",
    "thermal_evolve",
    "StabilizationResult",
    "stabilize_sfg",
    "default_jobs",
]

JOBS_ENV = "QZBSIM_JOBS"
QUASI_CW_RATIO = 10.0


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def modulation_extinction(loss_with, loss_without, reference_loss):
    """(loss_without - loss_with) / reference_loss; negative means the pump deepens the dip."""
    if reference_loss == 0:
        raise ValueError("reference loss must be non-zero")
    return (np.asarray(loss_without) - np.asarray(loss_with)) / reference_loss


@dataclass
class ExtinctionReport:
    detunings_nm: np.ndarray
    loss_with_pump: np.ndarray
    loss_without_pump: np.ndarray
    reference_loss: float
    extinction: np.ndarray
    sf_conversion: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        if not self.reference_loss > 0:
            raise ValueError("reference loss must be positive")

    @classmethod
    def from_losses(cls, detunings_nm, loss_with, loss_without, reference_loss,
                    sf_conversion=None):
        loss_with = np.asarray(loss_with, dtype=float)
        loss_without = np.asarray(loss_without, dtype=float)
        return cls(np.asarray(detunings_nm, dtype=float), loss_with, loss_without,
                   float(reference_loss),
                   modulation_extinction(loss_with, loss_without, reference_loss),
                   None if sf_conversion is None else np.asarray(sf_conversion, dtype=float))

    def recomputed(self) -> np.ndarray:
        return modulation_extinction(self.loss_with_pump, self.loss_without_pump,
                                     self.reference_loss)

    def best(self) -> tuple[float, float]:
        i = int(np.argmax(self.extinction))
        return float(self.detunings_nm[i]), float(self.extinction[i])

    def to_csv(self, index_name: str = "detuning_nm", include_conversion: bool = False) -> str:
        """CSV with shortest round-trip floats; optionally appends ``sf_conversion``."""
        cols = [self.detunings_nm, self.loss_with_pump, self.loss_without_pump, self.extinction]
        header = [index_name, "loss_pump_on", "loss_pump_off", "extinction"]
        if include_conversion and self.sf_conversion is not None:
            cols.append(self.sf_conversion)
            header.append("sf_conversion")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def is_quasi_cw(cfg: ScenarioConfig) -> bool:
    if cfg.signal.shape == "cw" or cfg.pump.shape == "cw":
        return True
    return cfg.signal.fwhm >= QUASI_CW_RATIO * cfg.pump.fwhm


def analysis_window(cfg: ScenarioConfig) -> tuple[float, float]:
    sim = cfg.sim
    if cfg.pump.shape == "gaussian_train":
        pump_center = float(cfg.pump.pulse_center(0.0))
    else:
        pump_center = 0.5 * (sim.t_start + sim.t_end)
    if is_quasi_cw(cfg):
        half = 0.5 * (cfg.pump.fwhm if cfg.pump.shape == "gaussian_train" else cfg.signal.fwhm)
        lo, hi = pump_center - half, pump_center + half
    else:
        center = float(cfg.signal.pulse_center(pump_center))
        half = TRUNCATE_SIGMA * cfg.signal.sigma
        lo, hi = center - half, center + half
    lo, hi = max(lo, sim.t_start), min(hi, sim.t_end)
    if not hi > lo:
        raise ValueError("analysis window does not intersect the simulated interval")
    return lo, hi


def _at_detuning(cfg: ScenarioConfig, detuning_nm: float) -> ScenarioConfig:
    delta = float(detuning_nm_to_rad(detuning_nm, cfg.signal_mode.lambda0))
    return cfg.with_signal(carrier_detuning=delta)


def point_losses(cfg: ScenarioConfig, window=None) -> tuple[float, float, float]:
    """(loss with pump, loss without pump, SF conversion) for one scenario."""
    window = analysis_window(cfg) if window is None else window
    on = integrate(cfg)
    off = integrate(cfg.with_pump(peak_power=0.0))
    return signal_loss(on, window), signal_loss(off, window), sf_conversion_fraction(on, window)


def _scan_task(args):
    cfg, key = args
    try:
        return key, point_losses(cfg)
    except IntegrationError as exc:
        raise IntegrationError(f"at scan point {key!r}: {exc}", exc.last_good_time) from exc


def _run_tasks(tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return dict(map(_scan_task, tasks))
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return dict(pool.map(_scan_task, tasks))


def reference_loss(cfg: ScenarioConfig) -> float:
    """Pump-off loss with the signal on resonance."""
    ref_cfg = _at_detuning(cfg, 0.0).with_pump(peak_power=0.0)
    return signal_loss(integrate(ref_cfg), analysis_window(ref_cfg))


def detuning_scan(cfg: ScenarioConfig, detunings_nm, pump_on: bool = True,
                  jobs: int | None = None) -> ExtinctionReport:
    """Signal losses with and without the pump at each detuning [nm, negative blue].

    With ``pump_on=False`` the "with pump" runs also have the pump off, which
    gives the control scan (extinction identically zero).
    """
    jobs = default_jobs() if jobs is None else jobs
    base = cfg if pump_on else cfg.with_pump(peak_power=0.0)
    dets = [float(d) for d in detunings_nm]
    results = _run_tasks([(_at_detuning(base, d), d) for d in dets], jobs)
    ref = reference_loss(cfg)
    with_p = [results[d][0] for d in dets]
    without = [results[d][1] for d in dets]
    conv = [results[d][2] for d in dets]
    return ExtinctionReport.from_losses(dets, with_p, without, ref, conv)


def alignment_scan(cfg: ScenarioConfig, offsets, jobs: int | None = None) -> ExtinctionReport:
    """Extinction vs pump-signal delay [s] at the scenario's signal detuning.

    Rows are keyed by offset (the ``detunings_nm`` column holds the offsets
    in ps for this report).
    """
    if cfg.signal.shape != "gaussian_train" or cfg.pump.shape != "gaussian_train":
        raise ValueError("alignment scan needs pulsed signal and pump")
    jobs = default_jobs() if jobs is None else jobs
    offs = [float(o) for o in offsets]
    tasks = []
    for o in offs:
        shifted = cfg.with_signal(epoch_offset=cfg.signal.epoch_offset + o)
        tasks.append((shifted, o))
    results = _run_tasks(tasks, jobs)
    ref = reference_loss(cfg)
    return ExtinctionReport.from_losses(
        np.array(offs) * 1e12,
        [results[o][0] for o in offs],
        [results[o][1] for o in offs],
        ref,
        [results[o][2] for o in offs],
    )


def coupling_sweep(cfg: ScenarioConfig, g_values, jobs: int | None = None) -> ExtinctionReport:
    """Extinction and SF conversion per signal photon as g varies.

    The ``detunings_nm`` column holds g/2π in Hz for this report.
    """
    jobs = default_jobs() if jobs is None else jobs
    gs = [float(g) for g in g_values]
    results = _run_tasks([(cfg.with_coupling(g=g), g) for g in gs], jobs)
    ref = reference_loss(cfg)
    return ExtinctionReport.from_losses(
        np.array(gs) / (2 * math.pi),
        [results[g][0] for g in gs],
        [results[g][1] for g in gs],
        ref,
        [results[g][2] for g in gs],
    )


def extinction_at(cfg: ScenarioConfig, detuning_nm: float, ref: float | None = None) -> float:
    ref = reference_loss(cfg) if ref is None else ref
    on, off, _ = point_losses(_at_detuning(cfg, detuning_nm))
    return float(modulation_extinction(on, off, ref))


def calibrate_coupling(cfg: ScenarioConfig, target: float = 0.510,
                       detuning_nm: float = -0.01, g_bracket=None,
                       xtol: float = 1e-6) -> float:
    """Find g [rad/s] giving ``target`` extinction at ``detuning_nm``.

    Searches in log g between the bracket ends (default 2π·(1 kHz .. 10 MHz));
    the lower root is returned if extinction is not monotonic.
    """
    ref = reference_loss(cfg)
    lo, hi = g_bracket or (2 * math.pi * 1e3, 2 * math.pi * 1e7)

    def excess(log_g):
        return extinction_at(cfg.with_coupling(g=math.exp(log_g)), detuning_nm, ref) - target

    grid = np.linspace(math.log(lo), math.log(hi), 13)
    vals = [excess(x) for x in grid]
    for x0, x1, v0, v1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if v0 <= 0 <= v1:
            return math.exp(brentq(excess, x0, x1, xtol=xtol))
    raise ValueError(f"target extinction {target} not reachable in the g bracket; "
                     f"max seen {max(vals) + target:.3f}")


# --------------------------------------------------------------------------
# thermal drift and tracking

def thermal_evolve(model: ThermalModel, absorbed_power, t, lambda_start=None):
    """Resonance wavelength [m] under dλ/dt = (λ_cold + k_th·P(t) - λ)/τ_th.

    ``absorbed_power`` is a callable of time [W] or a constant.
    """
    if model.lambda_cold is None:
        raise ValueError("thermal model needs lambda_cold")
    t = np.asarray(t, dtype=float)
    power = absorbed_power if callable(absorbed_power) else (lambda _t, p=absorbed_power: p)
    lam0 = model.lambda_cold if lambda_start is None else lambda_start
    # integrate the shift from the cold wavelength to keep tolerances meaningful
    def rhs(tt, y):
        return np.array([(model.k_th * power(tt) - y[0]) / model.tau_th])

    if t.size == 1:
        return np.array([lam0])
    sol = integrate_dopri(rhs, (t[0], t[-1]), np.array([lam0 - model.lambda_cold]), t,
                          rtol=1e-10, atol=1e-18, max_step=model.tau_th / 4)
    return model.lambda_cold + sol.y[:, 0]


@dataclass
class StabilizationResult:
    """
    Controller trace. ``residual`` is laser minus resonance wavelength [m]
    per controller step for the signal drive (the pump trace is in
    ``pump_residual``).
    """

    t: np.ndarray
    laser: np.ndarray
    resonance: np.ndarray
    residual: np.ndarray
    pump_residual: np.ndarray
    converged: bool
    steps_to_converge: int | None
    tolerance: float

    @property
    def final_residual(self) -> float:
        return float(abs(self.residual[-1]))


def _intracavity(mode, detuning_m, flux):
    """Steady CW photon number at a wavelength detuning [m]."""
    d = -2 * math.pi * 299792458.0 * detuning_m / mode.lambda0**2
    return mode.kappa_ext * flux / (d * d + 0.25 * mode.kappa**2)


def stabilize_sfg(cfg: ScenarioConfig, n_steps: int = 6000, period: float = 1e-6,
                  step: float | None = None, enabled: bool = True,
                  heating_power: float | None = None,
                  hold: int = 10, tolerance_fraction: float = 0.1) -> StabilizationResult:
    """Track both drives onto their thermally drifting resonances.

    Each controller step probes the intracavity photon number at the current
    laser wavelength and one step either side and moves to the brightest;
    the resonances follow the first-order thermal lag driven by the coupled
    average power (``heating_power`` overrides it). Converged when the
    signal and pump residuals stay below ``tolerance_fraction`` of the
    linewidth for ``hold`` consecutive steps. Non-convergence is reported
    in the result.
    """
    ms, mp = cfg.signal_mode, cfg.pump_mode
    linewidth = ms.linewidth
    step = linewidth / 20 if step is None else step
    if not step < linewidth / 2:
        raise ValueError("controller step must be below half the linewidth")
    tol = tolerance_fraction * linewidth
    thermal = cfg.thermal
    if heating_power is None:
        heating_power = cfg.signal.average_power + cfg.pump.average_power

    lam_cold_s = ms.lambda0 if thermal is None or thermal.lambda_cold is None else thermal.lambda_cold
    lam_cold_p = mp.lambda0 * lam_cold_s / ms.lambda0
    shift = 0.0
    if thermal is not None:
        target_shift = thermal.k_th * heating_power
        decay = math.exp(-period / thermal.tau_th)

    flux_s = max(cfg.signal.average_power, 1e-12) / ms.photon_energy
    flux_p = max(cfg.pump.average_power, 1e-12) / mp.photon_energy
    laser_s, laser_p = lam_cold_s, lam_cold_p

    ts, lasers, resonances, res_s, res_p = [], [], [], [], []
    run = 0
    converged_at = None
    for k in range(n_steps):
        if thermal is not None:
            shift = target_shift + (shift - target_shift) * decay
        res_now_s = lam_cold_s * (1 + shift / lam_cold_s)
        res_now_p = lam_cold_p * (1 + shift / lam_cold_s)
        if enabled:
            laser_s = _hill_climb(ms, laser_s, res_now_s, step, flux_s)
            laser_p = _hill_climb(mp, laser_p, res_now_p, step, flux_p)
        rs, rp = laser_s - res_now_s, laser_p - res_now_p
        ts.append((k + 1) * period)
        lasers.append(laser_s)
        resonances.append(res_now_s)
        res_s.append(rs)
        res_p.append(rp)
        if abs(rs) < tol and abs(rp) < tol:
            run += 1
            if run == hold and converged_at is None:
                converged_at = k + 2 - hold
        else:
            run = 0
            converged_at = None
    converged = converged_at is not None and run >= hold
    return StabilizationResult(np.array(ts), np.array(lasers), np.array(resonances),
                               np.array(res_s), np.array(res_p), converged,
                               converged_at if converged else None, tol)


def _hill_climb(mode, laser, resonance, step, flux):
    probes = (laser - step, laser, laser + step)
    fom = [_intracavity(mode, p - resonance, flux) for p in probes]
    return probes[int(np.argmax(fom))]

