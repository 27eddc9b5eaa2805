"""
Noise-photon accounting from gated count data.

Two linear rate equations. Without the disk, fiber Raman noise per gate:

    R_f·L1·P1·A(α1) + R_f·L2·P2 = D1 / (η·G1)

and with the disk, adding the out-coupled cavity noise R_r per gate:

    R_f·L1·P3·A(α2) + R_r + R_f·L2·P4 = D2 / (η·G2)

A(α) is the factor applied to the noise generated upstream of the tapered
region. The default reads the quoted dB loss as a power transmission,
A = 10^(-α/10); ``"inverse"`` (A = 10^(+α/10)) and ``"none"`` (A = 1) are
available so the residual against a reference R_r can be reported under
each reading. Negative solved rates are returned as-is and flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

__all__ = [
    "NoiseBudget",
    "ModeCount",
    "CavityRate",
    "db_to_transmission",
    "solve_fiber_rate",
    "solve_cavity_rate",
    "synthesize_counts",
    "per_mode_probability",
    "count_time_frequency_modes",
    "BudgetFile",
    "load_budget",
    "parse_budget",
]

ALPHA_CONVENTIONS = ("transmission", "inverse", "none")
DEFAULT_CONVENTION_FACTOR = 0.26


def db_to_transmission(alpha_db: float) -> float:
    return 10.0 ** (-alpha_db / 10.0)


@dataclass(frozen=True)
class NoiseBudget:
    """
    One row of a noise measurement plus the fixed setup constants.

    Lengths in m, powers in W, rates in Hz, ``alpha_db`` the insertion
    loss of the tapered region in dB.
    """

    L1: float
    L2: float
    P_in: float
    P_out: float
    alpha_db: float
    eta_total: float
    gate_rate: float
    detect_rate: float
    alpha_convention: str = "transmission"

    def __post_init__(self) -> None:
        if not (self.L1 > 0 and self.L2 > 0):
            raise ValueError("fiber lengths must be positive")
        if not 0 < self.eta_total <= 1:
            raise ValueError("eta_total must be in (0, 1]")
        if not self.gate_rate > 0:
            raise ValueError("gate_rate must be positive")
        if not 0 <= self.detect_rate < self.gate_rate:
            raise ValueError("detect_rate must be in [0, gate_rate)")
        if not (self.P_in >= 0 and self.P_out >= 0):
            raise ValueError("powers must be non-negative")
        if not self.alpha_db >= 0:
            raise ValueError("alpha_db must be non-negative")
        if self.alpha_convention not in ALPHA_CONVENTIONS:
            raise ValueError(f"alpha_convention must be one of {ALPHA_CONVENTIONS}")

    @property
    def transmission(self) -> float:
        return db_to_transmission(self.alpha_db)

    @property
    def alpha_factor(self) -> float:
        if self.alpha_convention == "transmission":
            return self.transmission
        if self.alpha_convention == "inverse":
            return 1.0 / self.transmission
        return 1.0

    @property
    def per_gate_noise(self) -> float:
        """Detected counts per gate referred to the chip, D/(η·G)."""
        return self.detect_rate / (self.eta_total * self.gate_rate)

    @property
    def fiber_weight(self) -> float:
        """L1·P_in·A(α) + L2·P_out [m·W]."""
        return self.L1 * self.P_in * self.alpha_factor + self.L2 * self.P_out


def solve_fiber_rate(budget_without_disk: NoiseBudget) -> float:
    """R_f in photons per gate per metre per watt."""
    weight = budget_without_disk.fiber_weight
    if weight == 0:
        raise ValueError("fiber weight L1·P1·A + L2·P2 is zero")
    return budget_without_disk.per_gate_noise / weight


@dataclass(frozen=True)
class CavityRate:
    r_r: float
    total_per_gate: float
    fiber_per_gate: float

    @property
    def consistent(self) -> bool:
        return self.r_r >= 0

    def residual(self, reference: float) -> float:
        return self.r_r - reference


def solve_cavity_rate(r_f: float, budget_with_disk: NoiseBudget) -> CavityRate:
    if not r_f >= 0:
        raise ValueError("R_f must be non-negative")
    total = budget_with_disk.per_gate_noise
    fiber = r_f * budget_with_disk.fiber_weight
    return CavityRate(total - fiber, total, fiber)


def synthesize_counts(r_f, r_r, budget_without_disk: NoiseBudget,
                      budget_with_disk: NoiseBudget) -> tuple[NoiseBudget, NoiseBudget]:
    """Forward model: replace the detection rates with those implied by (R_f, R_r)."""
    b1, b2 = budget_without_disk, budget_with_disk
    d1 = r_f * b1.fiber_weight * b1.eta_total * b1.gate_rate
    d2 = (r_f * b2.fiber_weight + r_r) * b2.eta_total * b2.gate_rate
    return replace(b1, detect_rate=d1), replace(b2, detect_rate=d2)


@dataclass(frozen=True)
class ModeCount:
    filter_bandwidth: float
    pulse_fwhm: float
    convention_factor: float = DEFAULT_CONVENTION_FACTOR

    @property
    def n_modes(self) -> float:
        return count_time_frequency_modes(self.filter_bandwidth, self.pulse_fwhm,
                                          self.convention_factor)


def count_time_frequency_modes(filter_bandwidth: float, pulse_fwhm: float,
                               convention_factor: float = DEFAULT_CONVENTION_FACTOR) -> float:
    """factor·B·T, never below one mode.

    The default factor 0.26 is a calibration (200 GHz x 250 ps -> 13), not
    derived from a pulse-shape convention.
    """
    if not (filter_bandwidth > 0 and pulse_fwhm > 0 and convention_factor > 0):
        raise ValueError("bandwidth, duration and factor must be positive")
    return max(1.0, convention_factor * filter_bandwidth * pulse_fwhm)


def per_mode_probability(r_r: float, modes) -> float:
    n = modes.n_modes if isinstance(modes, ModeCount) else float(modes)
    if not n >= 1:
        raise ValueError("n_modes must be at least 1")
    return r_r / n


# --------------------------------------------------------------------------
# budget files

@dataclass(frozen=True)
class BudgetFile:
    without_disk: NoiseBudget
    with_disk: NoiseBudget
    modes: ModeCount
    reference_rr: float | None = None

    def solve(self) -> dict:
        r_f = solve_fiber_rate(self.without_disk)
        cav = solve_cavity_rate(r_f, self.with_disk)
        out = {
            "alpha_convention": self.with_disk.alpha_convention,
            "per_gate_without_disk": self.without_disk.per_gate_noise,
            "per_gate_with_disk": self.with_disk.per_gate_noise,
            "R_f": r_f,
            "R_r": cav.r_r,
            "consistent": cav.consistent,
            "n_modes": self.modes.n_modes,
            "per_mode_probability": per_mode_probability(cav.r_r, self.modes),
        }
        if self.reference_rr is not None:
            out["reference_R_r"] = self.reference_rr
            out["residual_R_r"] = cav.residual(self.reference_rr)
            out["per_mode_reference"] = per_mode_probability(self.reference_rr, self.modes)
        return out

    def with_convention(self, convention: str) -> "BudgetFile":
        return replace(self,
                       without_disk=replace(self.without_disk, alpha_convention=convention),
                       with_disk=replace(self.with_disk, alpha_convention=convention))


_CASE_COLUMNS = {
    "gating_rate_khz": 1e3,
    "detection_rate_khz": 1e3,
    "input_power_uw": 1e-6,
    "output_power_uw": 1e-6,
    "loss_db": 1.0,
}
_GLOBAL_KEYS = {
    "eta_total": 1.0,
    "length_before_m": 1.0,
    "length_after_m": 1.0,
    "filter_bandwidth_ghz": 1e9,
    "pulse_fwhm_ps": 1e-12,
    "convention_factor": 1.0,
    "reference_rr": 1.0,
}
_CASES = ("without_disk", "with_disk")


def parse_budget(text: str, source: str = "<budget>") -> BudgetFile:
    """Parse a budget file.

    Global keys: ``eta_total``, ``length_before_m``, ``length_after_m``,
    ``filter_bandwidth_ghz``, ``pulse_fwhm_ps``, optional
    ``convention_factor``, ``reference_rr`` and ``alpha_convention``.
    Per case (``without_disk``, ``with_disk``):
    ``case.<name>.{gating_rate_khz, detection_rate_khz, input_power_uw,
    output_power_uw, loss_db}``.
    """
    vals: dict[str, float] = {}
    convention = "transmission"
    errors = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"{source}:{lineno}: expected 'key = value'")
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "alpha_convention":
            convention = val
            continue
        parts = key.split(".")
        ok = key in _GLOBAL_KEYS or (
            len(parts) == 3 and parts[0] == "case" and parts[1] in _CASES
            and parts[2] in _CASE_COLUMNS)
        if not ok:
            errors.append(f"{source}:{lineno}: unknown key {key!r}")
            continue
        try:
            vals[key] = float(val)
        except ValueError:
            errors.append(f"{source}:{lineno}: cannot parse {val!r}")
    required = ["eta_total", "length_before_m", "length_after_m", "filter_bandwidth_ghz",
                "pulse_fwhm_ps"]
    required += [f"case.{c}.{col}" for c in _CASES for col in _CASE_COLUMNS]
    missing = [k for k in required if k not in vals]
    if missing:
        errors.append(f"{source}: missing keys: {', '.join(missing)}")
    if errors:
        raise ValueError("invalid budget file:\n  " + "\n  ".join(errors))

    def si(key):
        scale = _GLOBAL_KEYS.get(key) or _CASE_COLUMNS[key.rsplit(".", 1)[1]]
        return vals[key] * scale

    def case(name):
        p = f"case.{name}."
        return NoiseBudget(si("length_before_m"), si("length_after_m"),
                           si(p + "input_power_uw"), si(p + "output_power_uw"),
                           vals[p + "loss_db"], vals["eta_total"],
                           si(p + "gating_rate_khz"), si(p + "detection_rate_khz"),
                           convention)

    modes = ModeCount(si("filter_bandwidth_ghz"), si("pulse_fwhm_ps"),
                      vals.get("convention_factor", DEFAULT_CONVENTION_FACTOR))
    return BudgetFile(case("without_disk"), case("with_disk"), modes, vals.get("reference_rr"))


def load_budget(path) -> BudgetFile:
    path = Path(path)
    return parse_budget(path.read_text(encoding="utf-8"), str(path))

