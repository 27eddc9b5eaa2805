"""
Three-mode χ² coupled-mode dynamics with taper input-output.

Mode amplitudes are photon-number normalized (|a|² is the intracavity
photon number) and each is written in the frame of its own drive carrier,
so every coefficient is time independent:

    da/dt = (iδa - κa/2)·a - i·g·b*·c + √κa,ext·s_in
    db/dt = (iδb - κb/2)·b - i·g·a*·c + √κb,ext·p_in
    dc/dt = (iδc - κc/2)·c - i·g·a·b
    s_out = s_in - √κa,ext·a

with δa, δb the drive detunings and δc = δa + δb + delta_c. |s_in|² is a
photon flux. Alongside the three amplitudes the integrator carries running
photon integrals (input, output, intrinsic loss, nonlinear transfer, SF
out-coupling) so windowed losses and the photon ledger are exact to the
integrator tolerance rather than to the output grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .integrator import CONTROLLER_VERSION, IntegrationError, integrate_dopri
from .resonator import HBAR
from .scenario import DriveEnvelope, ScenarioConfig

__all__ = [
    "ThreeModeState",
    "TransmissionTrace",
    "IntegrationError",
    "integrate",
    "free_evolution",
    "signal_loss",
    "sf_conversion_fraction",
    "photon_balance",
    "ShgResult",
    "shg_steady_state",
]

# accumulator slots after the three amplitudes
_ACC = ("sig_in", "sig_out", "sig_loss", "nl", "pump_in", "pump_out", "pump_loss",
        "sf_ext", "sf_int")
N_STATE = 3 + len(_ACC)


@dataclass(frozen=True)
class ThreeModeState:
    a: complex = 0j
    b: complex = 0j
    c: complex = 0j
    t: float = 0.0

    def __post_init__(self) -> None:
        for name in ("a", "b", "c"):
            v = complex(getattr(self, name))
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"{name} must be finite")

    @property
    def photons(self) -> tuple[float, float, float]:
        return abs(self.a) ** 2, abs(self.b) ** 2, abs(self.c) ** 2


@dataclass
class TransmissionTrace:
    """
    Signal-port powers and intracavity photon numbers on a uniform grid.

    ``cum_in``, ``cum_out`` and ``cum_sf`` are the running photon counts
    (signal in, signal out, SF out) from the start of the run; windowed
    integrals are differences of these.
    """

    t: np.ndarray
    p_in: np.ndarray
    p_out: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray
    n_c: np.ndarray
    sf_flux: np.ndarray
    cum_in: np.ndarray
    cum_out: np.ndarray
    cum_sf: np.ndarray
    photon_energy: float
    ledger: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_powers(cls, t, p_in, p_out, photon_energy=1.0, sf_flux=None):
        """Build a trace from sampled powers only (cumulative by trapezoid)."""
        t = np.asarray(t, dtype=float)
        p_in = np.asarray(p_in, dtype=float)
        p_out = np.asarray(p_out, dtype=float)
        sf = np.zeros_like(t) if sf_flux is None else np.asarray(sf_flux, dtype=float)
        zeros = np.zeros_like(t)

        def cum(y):
            out = np.zeros_like(t)
            out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
            return out

        return cls(t, p_in, p_out, zeros, zeros, zeros, sf,
                   cum(p_in / photon_energy), cum(p_out / photon_energy), cum(sf),
                   photon_energy)

    def __post_init__(self) -> None:
        if np.any(self.p_out < -1e-12 * max(1.0, float(np.max(np.abs(self.p_in), initial=0)))):
            raise ValueError("p_out must be non-negative")


def _drive_amp(drive: DriveEnvelope, energy: float):
    """Return a scalar function t -> √(photon flux)."""
    if drive.peak_power == 0:
        return lambda t: 0.0
    if drive.shape == "cw":
        amp = math.sqrt(drive.peak_power / energy)
        return lambda t: amp
    peak_amp = math.sqrt(drive.peak_power / energy)
    period = 1.0 / drive.rep_rate
    epoch = drive.epoch_offset
    inv_sig = 1.0 / drive.sigma
    cutoff = 5.0

    def amp(t):
        dt = t - epoch
        dt -= round(dt / period) * period
        x = dt * inv_sig
        if x > cutoff or x < -cutoff:
            return 0.0
        return peak_amp * math.exp(-0.25 * x * x)

    return amp


def _max_step(cfg: ScenarioConfig) -> float:
    steps = [d.fwhm / 4.0 for d in (cfg.signal, cfg.pump)
             if d.shape == "gaussian_train" and d.peak_power > 0]
    return min(steps) if steps else np.inf


def _three_mode_rhs(g, la, lb, lc, ra, rb, ka0, kb0, kce, kc0, s_amp, p_amp):
    """Right-hand side on [a, b, c, accumulators...] for fixed coefficients.

    ``la`` etc. are iδ - κ/2; ``s_amp``/``p_amp`` map t to √(photon flux).
    """
    mig = -1j * g
    two_g = 2.0 * g

    def rhs(t, y):
        a, b, c = y[:3].tolist()
        s = s_amp(t)
        p = p_amp(t)
        na = a.real * a.real + a.imag * a.imag
        nb = b.real * b.real + b.imag * b.imag
        nc = c.real * c.real + c.imag * c.imag
        so = s - ra * a
        po = p - rb * b
        # photons leaving a (and b) into c per unit time
        q = -two_g * (a.conjugate() * b.conjugate() * c).imag
        return np.array([
            la * a + mig * b.conjugate() * c + ra * s,
            lb * b + mig * a.conjugate() * c + rb * p,
            lc * c + mig * a * b,
            s * s,
            so.real * so.real + so.imag * so.imag,
            ka0 * na,
            q,
            p * p,
            po.real * po.real + po.imag * po.imag,
            kb0 * nb,
            kce * nc,
            kc0 * nc,
        ], dtype=complex)

    return rhs


def free_evolution(initial: ThreeModeState, g: float, t_eval, delta_a: float = 0.0,
                   delta_b: float = 0.0, delta_c: float = 0.0, rtol: float = 1e-12,
                   atol: float = 1e-14) -> np.ndarray:
    """Evolve the amplitudes with every κ = 0 and no drives.

    Only the Hamiltonian terms act, so |a|²+|c|² and |b|²+|c|² are
    constants of motion. Returns complex amplitudes, shape (len(t_eval), 3).
    """
    t_eval = np.asarray(t_eval, dtype=float)
    wa, wb, wc = 1j * delta_a, 1j * delta_b, 1j * (delta_a + delta_b + delta_c)
    mig = -1j * g

    def rhs(t, y):
        a, b, c = y.tolist()
        return np.array([wa * a + mig * b.conjugate() * c,
                         wb * b + mig * a.conjugate() * c,
                         wc * c + mig * a * b])

    y0 = np.array([initial.a, initial.b, initial.c], dtype=complex)
    sol = integrate_dopri(rhs, (initial.t, float(t_eval[-1])), y0, t_eval, rtol=rtol, atol=atol)
    return sol.y


def integrate(cfg: ScenarioConfig, initial: ThreeModeState | None = None,
              t_eval=None) -> TransmissionTrace:
    """Integrate the three-mode equations over ``cfg.sim``.

    Parameters
    ----------
    cfg : ScenarioConfig
    initial : ThreeModeState, optional
        Starting amplitudes; the cavity starts empty by default.
    t_eval : array, optional
        Output grid; defaults to the uniform grid of ``cfg.sim``.

    Raises
    ------
    IntegrationError
        If the state becomes non-finite; carries the last good time.
    """
    ms, mp, mc = cfg.signal_mode, cfg.pump_mode, cfg.sf_mode
    e_s, e_p = ms.photon_energy, mp.photon_energy
    da_, db_ = cfg.signal.carrier_detuning, cfg.pump.carrier_detuning
    dc_ = da_ + db_ + cfg.coupling.delta_c
    ra = math.sqrt(ms.kappa_ext)
    kce = mc.kappa_ext
    rhs = _three_mode_rhs(
        cfg.coupling.g,
        1j * da_ - 0.5 * ms.kappa, 1j * db_ - 0.5 * mp.kappa, 1j * dc_ - 0.5 * mc.kappa,
        ra, math.sqrt(mp.kappa_ext), ms.kappa0, mp.kappa0, kce, mc.kappa0,
        _drive_amp(cfg.signal, e_s), _drive_amp(cfg.pump, e_p))

    sim = cfg.sim
    t_eval = sim.grid if t_eval is None else np.asarray(t_eval, dtype=float)
    init = initial or ThreeModeState(t=sim.t_start)
    y0 = np.zeros(N_STATE, dtype=complex)
    y0[:3] = init.a, init.b, init.c
    sol = integrate_dopri(rhs, (sim.t_start, sim.t_end), y0,
                          np.concatenate([t_eval, [sim.t_end]]),
                          rtol=sim.rel_tol, atol=sim.abs_tol, max_step=_max_step(cfg))
    y = sol.y[:-1]
    y_end = sol.y[-1]
    a, b, c = y[:, 0], y[:, 1], y[:, 2]
    s_in = np.sqrt(cfg.signal.power(t_eval) / e_s)
    s_out = s_in - ra * a
    acc = {name: float(y_end[3 + i].real) for i, name in enumerate(_ACC)}
    ledger = dict(acc)
    ledger.update(
        a0=abs(init.a) ** 2, b0=abs(init.b) ** 2, c0=abs(init.c) ** 2,
        a_end=abs(y_end[0]) ** 2, b_end=abs(y_end[1]) ** 2, c_end=abs(y_end[2]) ** 2,
    )
    meta = {
        "integrator": CONTROLLER_VERSION,
        "n_steps": sol.n_steps,
        "n_rejected": sol.n_rejected,
        "rel_tol": sim.rel_tol,
        "abs_tol": sim.abs_tol,
    }
    return TransmissionTrace(
        t=t_eval,
        p_in=s_in**2 * e_s,
        p_out=np.abs(s_out) ** 2 * e_s,
        n_a=np.abs(a) ** 2,
        n_b=np.abs(b) ** 2,
        n_c=np.abs(c) ** 2,
        sf_flux=kce * np.abs(c) ** 2,
        cum_in=y[:, 3].real,
        cum_out=y[:, 4].real,
        cum_sf=y[:, 10].real,
        photon_energy=e_s,
        ledger=ledger,
        meta=meta,
    )


def _window_counts(trace: TransmissionTrace, window):
    t0, t1 = window if window is not None else (trace.t[0], trace.t[-1])
    if not t1 > t0:
        raise ValueError("empty window")
    if t0 < trace.t[0] - 1e-18 or t1 > trace.t[-1] + 1e-18:
        raise ValueError("window outside the trace")

    def delta(cum):
        return float(np.interp(t1, trace.t, cum) - np.interp(t0, trace.t, cum))

    n_in = delta(trace.cum_in)
    if not n_in > 0:
        raise ValueError("no input signal inside the window")
    return n_in, delta(trace.cum_out), delta(trace.cum_sf)


def signal_loss(trace: TransmissionTrace, window=None) -> float:
    """1 - ∫p_out/∫p_in over ``window`` = (t0, t1); whole trace by default."""
    n_in, n_out, _ = _window_counts(trace, window)
    return 1.0 - n_out / n_in


def sf_conversion_fraction(trace: TransmissionTrace, window=None) -> float:
    """SF photons emitted through the taper per input signal photon."""
    n_in, _, n_sf = _window_counts(trace, window)
    return n_sf / n_in


def photon_balance(trace: TransmissionTrace) -> dict:
    """Closed photon ledgers for the whole run.

    Each entry is (lhs, rhs): signal photons in vs. out + intrinsic loss +
    transfer to SF + change of stored photons; likewise for the pump, and
    SF photons created vs. emitted + absorbed + stored.
    """
    L = trace.ledger
    return {
        "signal": (L["sig_in"],
                   L["sig_out"] + L["sig_loss"] + L["nl"] + L["a_end"] - L["a0"]),
        "pump": (L["pump_in"],
                 L["pump_out"] + L["pump_loss"] + L["nl"] + L["b_end"] - L["b0"]),
        "sf": (L["nl"], L["sf_ext"] + L["sf_int"] + L["c_end"] - L["c0"]),
    }


@dataclass(frozen=True)
class ShgResult:
    sh_power: float
    pump_power: float
    n_fundamental: float
    n_sh: float
    depletion: float
    regime_ok: bool


DEPLETION_LIMIT = 0.05


def shg_steady_state(pump_power: float, cfg: ScenarioConfig,
                     settle_lifetimes: float = 60.0) -> ShgResult:
    """Steady SH output power for a CW pump in the degenerate configuration.

    The pump mode of ``cfg`` is the fundamental, the SF mode holds the
    second harmonic, and ``coupling.delta_c`` is read as 2ω_p0 - ω_sh0:

        da/dt = (iδ - κa/2)·a - i·g·a*·c + √κa,ext·s
        dc/dt = (i(2δ + delta_c) - κc/2)·c - i·(g/2)·a²

    ``depletion`` is the drop of |a|² below its no-conversion value;
    ``regime_ok`` is False once it exceeds 5 %.
    """
    if not pump_power >= 0:
        raise ValueError("pump power must be non-negative")
    mp, mc = cfg.pump_mode, cfg.sf_mode
    g = cfg.coupling.g
    delta = cfg.pump.carrier_detuning
    la = 1j * delta - 0.5 * mp.kappa
    lc = 1j * (2 * delta + cfg.coupling.delta_c) - 0.5 * mc.kappa
    ra = math.sqrt(mp.kappa_ext)
    s = math.sqrt(pump_power / mp.photon_energy)
    a_lin = ra * s / (-la)
    n_lin = abs(a_lin) ** 2
    if pump_power == 0:
        return ShgResult(0.0, 0.0, 0.0, 0.0, 0.0, True)

    def rhs(t, y):
        a, c = y
        return np.array([la * a - 1j * g * a.conjugate() * c + ra * s,
                         lc * c - 0.5j * g * a * a])

    t_end = settle_lifetimes / min(mp.kappa, mc.kappa)
    # start from the linear solution so only the slow SH build-up remains
    sol = integrate_dopri(rhs, (0.0, t_end), np.array([a_lin, 0j]), [t_end],
                          rtol=cfg.sim.rel_tol, atol=cfg.sim.abs_tol)
    a, c = sol.y[-1]
    n_a, n_c = abs(a) ** 2, abs(c) ** 2
    sh_energy = HBAR * 2.0 * (mp.omega0 + delta)
    depletion = 1.0 - n_a / n_lin
    return ShgResult(sh_energy * mc.kappa_ext * n_c, pump_power, n_a, n_c, depletion,
                     depletion <= DEPLETION_LIMIT)
