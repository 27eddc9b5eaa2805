"""
Bulk and effective-index dispersion, resonance combs, phase-matching search.

The bulk index comes from a three-term Sellmeier fit loaded from a data file
(see ``data/linbo3_zelmon1997.disp``), with λ in µm:

    n²(λ) = 1 + Σ_i B_i·λ² / (λ² - C_i)

The guided index uses a symmetric slab of the film thickness clad by
``cladding_index`` (air for a suspended disk). Quasi-TE modes see the
ordinary index and solve the TE slab equation; quasi-TM modes see the
extraordinary index (z-cut film) and solve the TM one. Radial confinement
of the WGM is ignored, so combs and mismatches are qualitative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from scipy.optimize import brentq

from .resonator import DiskSpec, omega_from_wavelength

__all__ = [
    "SellmeierTerms",
    "DispersionModel",
    "ConstantIndex",
    "LinearIndex",
    "load_dispersion_file",
    "slab_effective_index",
    "resonance_comb",
    "PhaseMatchCandidate",
    "phase_match_search",
]

DATA_DIR = Path(__file__).parent / "data"
DEFAULT_DISPERSION_FILE = DATA_DIR / "linbo3_zelmon1997.disp"

ROOT_RTOL = 1e-9
ROOT_MAXITER = 200


class IndexModel(Protocol):
    def effective_index(self, wavelength: float, pol: str) -> float: ...


@dataclass(frozen=True)
class SellmeierTerms:
    """Oscillator strengths ``B`` and resonance terms ``C`` [µm²]."""

    B: tuple[float, ...]
    C: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.B) != len(self.C) or not self.B:
            raise ValueError("Sellmeier B and C must be non-empty and of equal length")

    def index(self, wavelength):
        lam2 = (np.asarray(wavelength, dtype=float) * 1e6) ** 2
        n2 = 1.0 + sum(b * lam2 / (lam2 - cc) for b, cc in zip(self.B, self.C))
        return np.sqrt(n2)


@dataclass(frozen=True)
class DispersionModel:
    sellmeier_o: SellmeierTerms
    sellmeier_e: SellmeierTerms
    film_thickness: float = 200e-9
    cladding_index: float = 1.0
    valid_range: tuple[float, float] = (0.4e-6, 5.0e-6)
    name: str = ""

    def __post_init__(self) -> None:
        if not self.film_thickness > 0:
            raise ValueError("film_thickness must be positive")
        if not self.cladding_index >= 1.0:
            raise ValueError("cladding_index must be >= 1")

    def bulk_index(self, wavelength, pol: str):
        if pol == "TE":
            return self.sellmeier_o.index(wavelength)
        if pol == "TM":
            return self.sellmeier_e.index(wavelength)
        raise ValueError(f"unknown polarization {pol!r}")

    def effective_index(self, wavelength: float, pol: str) -> float:
        lo, hi = self.valid_range
        if not lo <= wavelength <= hi:
            raise ValueError(
                f"wavelength {wavelength * 1e9:.1f} nm outside dispersion validity range"
            )
        n_core = float(self.bulk_index(wavelength, pol))
        return slab_effective_index(
            wavelength, n_core, self.cladding_index, self.film_thickness, pol
        )

    def with_thickness(self, thickness: float) -> "DispersionModel":
        return DispersionModel(
            self.sellmeier_o, self.sellmeier_e, thickness, self.cladding_index,
            self.valid_range, self.name,
        )


@dataclass(frozen=True)
class ConstantIndex:
    """Dispersionless stand-in; ``offsets`` adds a per-polarization shift."""

    n: float
    offsets: dict = field(default_factory=dict)

    def effective_index(self, wavelength: float, pol: str) -> float:
        return self.n + self.offsets.get(pol, 0.0)

    def __hash__(self):
        return hash((self.n, tuple(sorted(self.offsets.items()))))


@dataclass(frozen=True)
class LinearIndex:
    """n(λ) linear in λ with a wavelength-independent group index."""

    n_ref: float
    group_index: float
    lambda_ref: float

    def effective_index(self, wavelength: float, pol: str) -> float:
        slope = (self.n_ref - self.group_index) / self.lambda_ref
        return self.n_ref + slope * (wavelength - self.lambda_ref)


def load_dispersion_file(path=DEFAULT_DISPERSION_FILE, film_thickness=200e-9,
                         cladding_index=1.0) -> DispersionModel:
    """Parse a ``.disp`` coefficient file.

    Grammar: one ``key = value`` per line, ``#`` starts a comment. Required
    keys are ``ordinary.B``, ``ordinary.C``, ``extraordinary.B`` and
    ``extraordinary.C`` (comma separated). Optional: ``name``,
    ``valid_range_um`` (two numbers).
    """
    text = Path(path).read_text(encoding="utf-8")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = val

    known = {"name", "valid_range_um", "ordinary.B", "ordinary.C",
             "extraordinary.B", "extraordinary.C"}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    missing = sorted(k for k in known - {"name", "valid_range_um"} if k not in values)
    if missing:
        raise ValueError(f"{path}: missing keys {missing}")

    def floats(key):
        return tuple(float(x) for x in values[key].split(","))

    valid = (0.4e-6, 5.0e-6)
    if "valid_range_um" in values:
        lo, hi = floats("valid_range_um")
        valid = (lo * 1e-6, hi * 1e-6)
    return DispersionModel(
        SellmeierTerms(floats("ordinary.B"), floats("ordinary.C")),
        SellmeierTerms(floats("extraordinary.B"), floats("extraordinary.C")),
        film_thickness,
        cladding_index,
        valid,
        values.get("name", ""),
    )


def slab_effective_index(wavelength, n_core, n_clad, thickness, pol="TE"):
    """Fundamental-mode index of a symmetric slab waveguide.

    Solves w = r·u·tan(u) with u² + w² = V², r = 1 for TE and
    (n_clad/n_core)² for TM.
    """
    if not n_core > n_clad:
        raise ValueError("core index must exceed cladding index")
    k = 2.0 * math.pi / wavelength
    half = 0.5 * k * thickness
    V = half * math.sqrt(n_core**2 - n_clad**2)
    r = 1.0 if pol == "TE" else (n_clad / n_core) ** 2

    def f(u):
        return r * u * math.tan(u) - math.sqrt(max(V * V - u * u, 0.0))

    hi = min(V, 0.5 * math.pi) * (1.0 - 1e-15)
    u = brentq(f, 1e-300, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=ROOT_MAXITER)
    return math.sqrt(n_core**2 - (u / half) ** 2)


def resonance_comb(disk: DiskSpec, dispersion: IndexModel, pol: str,
                   band: tuple[float, float]) -> list[tuple[int, float]]:
    """All resonances 2πR·n_eff(λ) = m·λ inside ``band`` [m], sorted by λ.

    Returns an empty list when no azimuthal order resonates in the band.
    """
    lam_lo, lam_hi = sorted(band)
    if not lam_lo > 0:
        raise ValueError("band must be positive")
    circ = 2.0 * math.pi * disk.radius

    def order(lam):
        return circ * dispersion.effective_index(lam, pol) / lam

    m_lo = math.ceil(order(lam_hi))
    m_hi = math.floor(order(lam_lo))
    comb = []
    for m in range(max(m_lo, 1), m_hi + 1):
        def residual(lam, m=m):
            return circ * dispersion.effective_index(lam, pol) - m * lam

        if residual(lam_lo) * residual(lam_hi) > 0:
            continue
        lam = brentq(residual, lam_lo, lam_hi, xtol=lam_lo * 1e-15,
                     rtol=4 * np.finfo(float).eps, maxiter=ROOT_MAXITER)
        if abs(residual(lam)) > ROOT_RTOL * m * lam:
            raise RuntimeError(f"resonance root for m={m} did not converge")
        comb.append((m, lam))
    comb.sort(key=lambda e: e[1])
    return comb


@dataclass(frozen=True)
class PhaseMatchCandidate:
    """A telecom/near-IR pair with m_sh = 2·m_p.

    ``mismatch`` is ω_sh - 2ω_p [rad/s]; ``delta_c`` = -mismatch is the
    residual SF-mode detuning used by the coupled-mode engine.
    """

    m_p: int
    m_sh: int
    lambda_p: float
    lambda_sh: float
    mismatch: float

    @property
    def delta_c(self) -> float:
        return -self.mismatch


def phase_match_search(comb_te_telecom: Sequence[tuple[int, float]],
                       comb_tm_nearir: Sequence[tuple[int, float]],
                       tolerance: float | None = None) -> list[PhaseMatchCandidate]:
    """Pair every telecom order with its doubled near-IR order.

    Candidates are ranked by |mismatch| (ties by ``m_p``); when
    ``tolerance`` [rad/s] is given, pairs beyond it are dropped.
    """
    if not comb_te_telecom or not comb_tm_nearir:
        raise ValueError("both combs must be non-empty")
    sh_by_order = {m: lam for m, lam in comb_tm_nearir}
    out = []
    for m_p, lam_p in comb_te_telecom:
        lam_sh = sh_by_order.get(2 * m_p)
        if lam_sh is None:
            continue
        mismatch = omega_from_wavelength(lam_sh) - 2.0 * omega_from_wavelength(lam_p)
        if tolerance is not None and abs(mismatch) > tolerance:
            continue
        out.append(PhaseMatchCandidate(m_p, 2 * m_p, lam_p, lam_sh, float(mismatch)))
    out.sort(key=lambda p: (abs(p.mismatch), p.m_p))
    return out


def comb_spacing(comb: Sequence[tuple[int, float]]) -> np.ndarray:
    lams = np.array([lam for _, lam in comb])
    return np.diff(lams)


def group_index_from_fsr(radius: float, fsr: float, lambda0: float) -> float:
    """Invert Δλ = λ²/(2πR·n_g) for n_g."""
    return lambda0**2 / (2.0 * math.pi * radius * fsr)

