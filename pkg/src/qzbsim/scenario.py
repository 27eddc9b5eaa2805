"""
Scenario configuration: dataclasses plus the flat ``.scn`` text format.

A scenario file holds one ``key = value`` per line with dotted section
names; ``#`` starts a comment. Numeric keys carry their unit as a suffix
(``drives.pump.fwhm_ps = 250``) and are converted to SI once, here.
Angular rates (κ, g, detunings) are written as rate/2π, so
``kappa0_ghz = 1`` means κ0 = 2π·1e9 rad/s. Drive detunings may also be
given as ``detuning_nm`` with the laboratory sign convention (negative
is blue). See README.md for the full field table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .resonator import CavityMode, DiskSpec, detuning_nm_to_rad

__all__ = [
    "DriveEnvelope",
    "NonlinearCoupling",
    "ThermalModel",
    "SimSettings",
    "ScenarioConfig",
    "ScenarioError",
    "parse_scenario",
    "load_scenario",
    "serialize_scenario",
    "FIELD_TABLE",
]

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
TRUNCATE_SIGMA = 5.0
SHAPES = ("cw", "gaussian_train")


@dataclass(frozen=True)
class DriveEnvelope:
    """
    Input field at one port.

    ``carrier_detuning`` is laser minus resonance angular frequency
    [rad/s]; positive is blue. For ``gaussian_train`` pulses sit at
    ``epoch_offset + k / rep_rate`` and are truncated at ±5σ of the power
    envelope.
    """

    shape: str = "cw"
    peak_power: float = 0.0
    carrier_detuning: float = 0.0
    fwhm: float = 0.0
    rep_rate: float = 0.0
    epoch_offset: float = 0.0

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ValueError(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if not self.peak_power >= 0:
            raise ValueError(f"peak_power must be non-negative, got {self.peak_power}")
        if not math.isfinite(self.carrier_detuning):
            raise ValueError("carrier_detuning must be finite")
        if self.shape == "gaussian_train":
            if not (self.fwhm > 0 and self.rep_rate > 0):
                raise ValueError("gaussian_train needs positive fwhm and rep_rate")
            if not self.fwhm * self.rep_rate < 1:
                raise ValueError("fwhm * rep_rate must be < 1")

    @property
    def sigma(self) -> float:
        return self.fwhm * FWHM_TO_SIGMA

    @property
    def average_power(self) -> float:
        """Peak·FWHM·f_rep·√(π/(4 ln 2)) for Gaussian trains."""
        if self.shape == "cw":
            return self.peak_power
        return self.peak_power * self.fwhm * self.rep_rate * math.sqrt(math.pi / (4 * math.log(2)))

    def pulse_center(self, t):
        """Center of the pulse nearest to ``t``."""
        period = 1.0 / self.rep_rate
        k = np.round((np.asarray(t) - self.epoch_offset) / period)
        return self.epoch_offset + k * period

    def power(self, t):
        if self.shape == "cw":
            return np.full_like(np.asarray(t, dtype=float), self.peak_power)
        dt = np.asarray(t, dtype=float) - self.pulse_center(t)
        sig = self.sigma
        env = np.exp(-0.5 * (dt / sig) ** 2)
        return np.where(np.abs(dt) <= TRUNCATE_SIGMA * sig, self.peak_power * env, 0.0)

    def power_scalar(self, t: float) -> float:
        if self.shape == "cw":
            return self.peak_power
        period = 1.0 / self.rep_rate
        dt = t - self.epoch_offset
        dt -= round(dt / period) * period
        x = dt / self.sigma
        if abs(x) > TRUNCATE_SIGMA:
            return 0.0
        return self.peak_power * math.exp(-0.5 * x * x)


@dataclass(frozen=True)
class NonlinearCoupling:
    """
    χ² coupling between signal (a), pump (b) and sum-frequency (c) modes.

    ``delta_c`` is ω_a0 + ω_b0 - ω_c0 [rad/s]: how far the SF resonance
    sits from the sum of the two driven resonances.
    """

    g: float = 0.0
    delta_c: float = 0.0

    def __post_init__(self) -> None:
        if not self.g >= 0:
            raise ValueError(f"g must be non-negative, got {self.g}")


@dataclass(frozen=True)
class ThermalModel:
    """
    First-order thermal lag of the resonance wavelength.

    ``k_th`` is the equilibrium red shift per watt of heating [m/W];
    ``lambda_cold`` [m] defaults to the signal resonance when None.
    """

    tau_th: float = 1e-3
    k_th: float = 0.0
    lambda_cold: float | None = None

    def __post_init__(self) -> None:
        if not self.tau_th > 0:
            raise ValueError(f"tau_th must be positive, got {self.tau_th}")
        if not self.k_th >= 0:
            raise ValueError(f"k_th must be non-negative, got {self.k_th}")

    @classmethod
    def sized_for(cls, shift: float, heating_power: float, tau_th: float = 1e-3,
                  lambda_cold: float | None = None) -> "ThermalModel":
        """Model whose equilibrium shift at ``heating_power`` [W] is ``shift`` [m]."""
        if not heating_power > 0:
            raise ValueError("heating_power must be positive")
        return cls(tau_th, shift / heating_power, lambda_cold)


@dataclass(frozen=True)
class SimSettings:
    t_start: float
    t_end: float
    output_dt: float
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12

    def __post_init__(self) -> None:
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if not self.output_dt > 0:
            raise ValueError("output_dt must be positive")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")

    @property
    def grid(self) -> np.ndarray:
        n = int(math.floor((self.t_end - self.t_start) / self.output_dt + 1e-9))
        return self.t_start + self.output_dt * np.arange(n + 1)


@dataclass(frozen=True)
class ScenarioConfig:
    disk: DiskSpec
    signal_mode: CavityMode
    pump_mode: CavityMode
    sf_mode: CavityMode
    coupling: NonlinearCoupling
    signal: DriveEnvelope
    pump: DriveEnvelope
    sim: SimSettings
    thermal: ThermalModel | None = None
    seed: int = 0

    def with_signal(self, **kw) -> "ScenarioConfig":
        return replace(self, signal=replace(self.signal, **kw))

    def with_pump(self, **kw) -> "ScenarioConfig":
        return replace(self, pump=replace(self.pump, **kw))

    def with_coupling(self, **kw) -> "ScenarioConfig":
        return replace(self, coupling=replace(self.coupling, **kw))

    def with_sim(self, **kw) -> "ScenarioConfig":
        return replace(self, sim=replace(self.sim, **kw))


class ScenarioError(ValueError):
    """All problems found in a scenario file, one per line of ``errors``."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.errors))


# --------------------------------------------------------------------------
# units

TWO_PI = 2.0 * math.pi
UNITS = {
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9, "pm": 1e-12},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12, "fs": 1e-15},
    "power": {"w": 1.0, "mw": 1e-3, "uw": 1e-6, "nw": 1e-9},
    "freq": {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9},
    # angular rates are written as rate / 2π
    "rate": {"hz": TWO_PI, "khz": TWO_PI * 1e3, "mhz": TWO_PI * 1e6,
             "ghz": TWO_PI * 1e9, "rad_s": 1.0},
    "thermo": {"nm_per_w": 1e-9, "nm_per_mw": 1e-6, "m_per_w": 1.0},
    "scalar": {"": 1.0},
}


@dataclass(frozen=True)
class Field:
    key: str            # dotted key without unit suffix
    dim: str            # key into UNITS, or "str"/"int"
    unit: str           # canonical suffix used when serializing
    required: bool = True
    default: object = None
    doc: str = ""


def _mode_fields(name, pol):
    base = f"modes.{name}"
    return [
        Field(f"{base}.lambda", "length", "nm", doc="resonance wavelength"),
        Field(f"{base}.kappa0", "rate", "ghz", doc="intrinsic decay rate / 2π"),
        Field(f"{base}.kappa_ext", "rate", "ghz", False, 0.0, "external decay rate / 2π"),
        Field(f"{base}.pol", "str", "", False, pol, "TE or TM"),
        Field(f"{base}.m", "int", "", False, 0, "azimuthal order (0 = unknown)"),
    ]


def _drive_fields(name):
    base = f"drives.{name}"
    return [
        Field(f"{base}.shape", "str", "", doc="cw or gaussian_train"),
        Field(f"{base}.peak_power", "power", "mw", doc="peak power at the chip"),
        Field(f"{base}.detuning", "rate", "ghz", False, 0.0,
              "laser minus resonance / 2π, positive blue; or detuning_nm, negative blue"),
        Field(f"{base}.fwhm", "time", "ps", False, 0.0, "pulse FWHM (gaussian_train)"),
        Field(f"{base}.rep_rate", "freq", "mhz", False, 0.0, "repetition rate (gaussian_train)"),
        Field(f"{base}.epoch_offset", "time", "ps", False, 0.0, "center of pulse k=0"),
    ]


FIELD_TABLE: tuple[Field, ...] = tuple(
    [
        Field("disk.radius", "length", "um"),
        Field("disk.thickness", "length", "nm", False, 200e-9),
        Field("disk.group_index", "scalar", "", False, 2.09),
    ]
    + _mode_fields("signal", "TE")
    + _mode_fields("pump", "TE")
    + _mode_fields("sf", "TM")
    + [
        Field("coupling.g", "rate", "khz", doc="single-photon coupling / 2π"),
        Field("coupling.delta_c", "rate", "ghz", False, 0.0,
              "(ω_signal0 + ω_pump0 - ω_sf0) / 2π"),
    ]
    + _drive_fields("signal")
    + _drive_fields("pump")
    + [
        Field("thermal.tau", "time", "ms", False, None, "thermal relaxation time"),
        Field("thermal.k_th", "thermo", "nm_per_w", False, None, "red shift per heating watt"),
        Field("thermal.lambda_cold", "length", "nm", False, None, "cold resonance"),
        Field("sim.t_start", "time", "ns"),
        Field("sim.t_end", "time", "ns"),
        Field("sim.output_dt", "time", "ps"),
        Field("sim.rel_tol", "scalar", "", False, 1e-8),
        Field("sim.abs_tol", "scalar", "", False, 1e-12),
        Field("seed", "int", "", False, 0),
    ]
)
_BY_KEY = {f.key: f for f in FIELD_TABLE}


def _split_key(raw_key: str):
    """Map ``drives.pump.fwhm_ps`` to (Field, unit factor)."""
    if raw_key in _BY_KEY and _BY_KEY[raw_key].dim in ("str", "int", "scalar"):
        return _BY_KEY[raw_key], 1.0
    for f in FIELD_TABLE:
        if f.dim in ("str", "int", "scalar"):
            continue
        prefix = f.key + "_"
        if raw_key.startswith(prefix):
            suffix = raw_key[len(prefix):]
            if suffix in UNITS[f.dim]:
                return f, UNITS[f.dim][suffix]
            if f.key.endswith(".detuning") and suffix == "nm":
                return f, "nm"
    return None, None


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_scenario(text: str, source: str = "<scenario>") -> ScenarioConfig:
    """Strictly parse scenario text into SI dataclasses.

    Every problem is collected and raised together as a
    :class:`ScenarioError`: unknown or duplicate keys, bad values, missing
    required keys, and violated invariants.
    """
    errors: list[str] = []
    raw: dict[str, tuple[int, object, object]] = {}
    for lineno, line in _tokens(text):
        if "=" not in line:
            errors.append(f"{source}:{lineno}: expected 'key = value', got {line!r}")
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        f, factor = _split_key(key)
        if f is None:
            errors.append(f"{source}:{lineno}: unknown key {key!r}")
            continue
        if f.key in raw:
            errors.append(f"{source}:{lineno}: {f.key} given twice")
            continue
        try:
            if f.dim == "str":
                value = val
            elif f.dim == "int":
                value = int(val)
            else:
                value = float(val)
                if not math.isfinite(value):
                    raise ValueError("not finite")
        except ValueError:
            errors.append(f"{source}:{lineno}: {key}: cannot parse {val!r}")
            continue
        raw[f.key] = (lineno, value, factor)

    missing = [f.key for f in FIELD_TABLE if f.required and f.key not in raw]
    if missing:
        errors.append(f"{source}: missing required keys: {', '.join(missing)}")

    thermal_keys = [k for k in ("thermal.tau", "thermal.k_th") if k in raw]
    if thermal_keys and len(thermal_keys) < 2:
        errors.append(f"{source}: thermal section needs both thermal.tau and thermal.k_th")
    if errors:
        raise ScenarioError(errors)

    def get(key):
        f = _BY_KEY[key]
        if key not in raw:
            return f.default
        _, value, factor = raw[key]
        if factor == "nm":
            return value
        return value * factor if f.dim not in ("str", "int") else value

    def build(label, ctor, *args, **kw):
        try:
            return ctor(*args, **kw)
        except (ValueError, TypeError) as exc:
            errors.append(f"{source}: {label}: {exc}")
            return None

    disk = build("disk", DiskSpec, get("disk.radius"), get("disk.thickness"),
                 get("disk.group_index"))
    modes = {}
    for name in ("signal", "pump", "sf"):
        b = f"modes.{name}"
        modes[name] = build(b, CavityMode, get(f"{b}.lambda"), get(f"{b}.kappa0"),
                            get(f"{b}.kappa_ext"), get(f"{b}.pol"), get(f"{b}.m"))
    coupling = build("coupling", NonlinearCoupling, get("coupling.g"), get("coupling.delta_c"))
    drives = {}
    for name in ("signal", "pump"):
        b = f"drives.{name}"
        det = get(f"{b}.detuning")
        if f"{b}.detuning" in raw and raw[f"{b}.detuning"][2] == "nm":
            mode = modes[name]
            det = float(detuning_nm_to_rad(det, mode.lambda0)) if mode else 0.0
        drives[name] = build(b, DriveEnvelope, get(f"{b}.shape"), get(f"{b}.peak_power"), det,
                             get(f"{b}.fwhm"), get(f"{b}.rep_rate"), get(f"{b}.epoch_offset"))
    thermal = None
    if thermal_keys:
        thermal = build("thermal", ThermalModel, get("thermal.tau"), get("thermal.k_th"),
                        get("thermal.lambda_cold"))
    elif "thermal.lambda_cold" in raw:
        errors.append(f"{source}: thermal.lambda_cold given without thermal.tau/k_th")
    sim = build("sim", SimSettings, get("sim.t_start"), get("sim.t_end"), get("sim.output_dt"),
                get("sim.rel_tol"), get("sim.abs_tol"))
    if errors:
        raise ScenarioError(errors)
    return ScenarioConfig(disk, modes["signal"], modes["pump"], modes["sf"], coupling,
                          drives["signal"], drives["pump"], sim, thermal, get("seed"))


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), str(path))


# unit suffix with factor 1 for each dimension; used when no decimal in the
# canonical unit maps back to the exact SI double
_SI_UNIT = {"length": "m", "time": "s", "power": "w", "freq": "hz", "rate": "rad_s",
            "thermo": "m_per_w"}


def _exact_repr(si_value: float, factor: float) -> str | None:
    """Shortest decimal in the scaled unit that parses back to exactly ``si_value``."""
    if factor == 1.0:
        return repr(float(si_value))
    guess = si_value / factor
    candidates = [guess]
    lo = hi = guess
    for _ in range(8):
        lo, hi = np.nextafter(lo, -np.inf), np.nextafter(hi, np.inf)
        candidates += [lo, hi]
    for c in candidates:
        if float(repr(float(c))) * factor == si_value:
            return repr(float(c))
    return None


def _value_of(cfg: ScenarioConfig, key: str):
    parts = key.split(".")
    if parts[0] == "disk":
        return getattr(cfg.disk, {"radius": "radius", "thickness": "thickness",
                                  "group_index": "group_index"}[parts[1]])
    if parts[0] == "modes":
        mode = getattr(cfg, f"{parts[1]}_mode")
        attr = {"lambda": "lambda0", "kappa0": "kappa0", "kappa_ext": "kappa_ext",
                "pol": "pol", "m": "m_azimuthal"}[parts[2]]
        return getattr(mode, attr)
    if parts[0] == "coupling":
        return getattr(cfg.coupling, parts[1])
    if parts[0] == "drives":
        drive = getattr(cfg, parts[1])
        attr = "carrier_detuning" if parts[2] == "detuning" else parts[2]
        return getattr(drive, attr)
    if parts[0] == "thermal":
        if cfg.thermal is None:
            return None
        return getattr(cfg.thermal, {"tau": "tau_th", "k_th": "k_th",
                                     "lambda_cold": "lambda_cold"}[parts[1]])
    if parts[0] == "sim":
        return getattr(cfg.sim, parts[1])
    if parts[0] == "seed":
        return cfg.seed
    raise KeyError(key)


def serialize_scenario(cfg: ScenarioConfig) -> str:
    """Write every resolved field in canonical units.

    ``parse_scenario(serialize_scenario(cfg)) == cfg`` holds for any
    config produced by the parser.
    """
    lines = ["# resolved scenario (all fields, canonical units)"]
    section = None
    for f in FIELD_TABLE:
        value = _value_of(cfg, f.key)
        if value is None:
            continue
        head = f.key.rsplit(".", 1)[0] if "." in f.key else ""
        if head != section:
            lines.append("")
            section = head
        if f.dim == "str":
            lines.append(f"{f.key} = {value}")
        elif f.dim == "int":
            lines.append(f"{f.key} = {int(value)}")
        else:
            factor = UNITS[f.dim][f.unit]
            text = _exact_repr(float(value), factor)
            unit = f.unit
            if text is None:
                unit, text = _SI_UNIT[f.dim], repr(float(value))
            key = f"{f.key}_{unit}" if unit else f.key
            lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"

