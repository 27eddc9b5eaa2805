"""
Single-resonance bookkeeping for whispering-gallery modes.

Everything inside the package is SI (m, s, W, J, rad/s). Wavelength
detunings in nm only appear at the I/O boundary and go through
:func:`detuning_nm_to_rad` / :func:`detuning_rad_to_nm`, which use the
convention

    δω = -2πc·Δλ / λ0²

so a blue detuning (Δλ < 0) is a positive angular detuning.

Transmission of the taper-coupled (all-pass) resonance:

    T(δ) = |(iδ + (κ0 - κe)/2) / (iδ + (κ0 + κe)/2)|²

with κ0 the intrinsic and κe the external energy decay rate. The output
field convention is s_out = s_in - √κe·a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.constants import hbar as HBAR

__all__ = [
    "C_LIGHT",
    "HBAR",
    "CavityMode",
    "DiskSpec",
    "q_from_linewidth",
    "fsr_wavelength",
    "lorentzian_transmission",
    "external_ratio_for_loss",
    "omega_from_wavelength",
    "wavelength_from_omega",
    "detuning_nm_to_rad",
    "detuning_rad_to_nm",
    "photon_energy",
]

POLARIZATIONS = ("TE", "TM")


def omega_from_wavelength(wavelength):
    """Angular frequency [rad/s] of a vacuum wavelength [m]."""
    return 2.0 * np.pi * C_LIGHT / wavelength


def wavelength_from_omega(omega):
    return 2.0 * np.pi * C_LIGHT / omega


def photon_energy(wavelength):
    """ħω [J] at a vacuum wavelength [m]."""
    return HBAR * omega_from_wavelength(wavelength)


def detuning_nm_to_rad(delta_lambda_nm, lambda0):
    """Convert a wavelength detuning in nm to an angular detuning [rad/s].

    Parameters
    ----------
    delta_lambda_nm : float or array
        Laser wavelength minus resonance wavelength, in nm. Negative is blue.
    lambda0 : float
        Resonance wavelength [m].
    """
    return -2.0 * np.pi * C_LIGHT * (np.asarray(delta_lambda_nm) * 1e-9) / lambda0**2


def detuning_rad_to_nm(delta_omega, lambda0):
    return -np.asarray(delta_omega) * lambda0**2 / (2.0 * np.pi * C_LIGHT) * 1e9


@dataclass(frozen=True)
class CavityMode:
    """
    One WGM resonance.

    Parameters
    ----------
    lambda0 : float
        Center wavelength [m].
    kappa0 : float
        Intrinsic energy decay rate [rad/s].
    kappa_ext : float
        External (taper) energy decay rate [rad/s].
    pol : str
        Polarization family, ``"TE"`` or ``"TM"`` (quasi-TE / quasi-TM).
    m_azimuthal : int
        Azimuthal order; 0 when unknown.
    """

    lambda0: float
    kappa0: float
    kappa_ext: float = 0.0
    pol: str = "TE"
    m_azimuthal: int = 0

    def __post_init__(self) -> None:
        if not self.lambda0 > 0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0}")
        if not self.kappa0 > 0:
            raise ValueError(f"kappa0 must be positive, got {self.kappa0}")
        if not self.kappa_ext >= 0:
            raise ValueError(f"kappa_ext must be non-negative, got {self.kappa_ext}")
        if self.pol not in POLARIZATIONS:
            raise ValueError(f"pol must be one of {POLARIZATIONS}, got {self.pol!r}")
        if int(self.m_azimuthal) != self.m_azimuthal or self.m_azimuthal < 0:
            raise ValueError(f"m_azimuthal must be a non-negative integer, got {self.m_azimuthal}")

    @classmethod
    def from_q(cls, lambda0, q_loaded, ext_ratio, pol="TE", m_azimuthal=0):
        """Build a mode from its loaded Q and the ratio κe/κ0."""
        kappa = omega_from_wavelength(lambda0) / q_loaded
        kappa0 = kappa / (1.0 + ext_ratio)
        return cls(lambda0, kappa0, kappa0 * ext_ratio, pol, m_azimuthal)

    @property
    def omega0(self) -> float:
        return omega_from_wavelength(self.lambda0)

    @property
    def kappa(self) -> float:
        """Loaded (total) energy decay rate [rad/s]."""
        return self.kappa0 + self.kappa_ext

    @property
    def linewidth(self) -> float:
        """Loaded FWHM in wavelength [m]."""
        return self.lambda0**2 * self.kappa / (2.0 * np.pi * C_LIGHT)

    @property
    def q_loaded(self) -> float:
        return self.omega0 / self.kappa

    @property
    def photon_energy(self) -> float:
        return HBAR * self.omega0

    def transmission(self, delta_omega):
        return lorentzian_transmission(delta_omega, self.kappa0, self.kappa_ext)


@dataclass(frozen=True)
class DiskSpec:
    """Microdisk geometry. ``group_index`` is used for FSR estimates only."""

    radius: float
    thickness: float
    group_index: float = 2.09

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not self.thickness > 0:
            raise ValueError(f"thickness must be positive, got {self.thickness}")
        if not self.group_index > 0:
            raise ValueError(f"group_index must be positive, got {self.group_index}")


def q_from_linewidth(lambda0: float, delta_lambda_fwhm: float) -> float:
    """Loaded quality factor λ0/Δλ from a measured FWHM linewidth."""
    if not (lambda0 > 0 and delta_lambda_fwhm > 0):
        raise ValueError("wavelength and linewidth must both be positive")
    if delta_lambda_fwhm >= lambda0:
        raise ValueError("linewidth must be smaller than the wavelength")
    return lambda0 / delta_lambda_fwhm


def fsr_wavelength(radius: float, group_index: float, lambda0: float) -> float:
    """Free spectral range Δλ = λ0²/(2πR·n_g) [m]."""
    if not (radius > 0 and group_index > 0 and lambda0 > 0):
        raise ValueError("radius, group index and wavelength must be positive")
    return lambda0**2 / (2.0 * np.pi * radius * group_index)


def lorentzian_transmission(delta_omega, kappa0, kappa_ext):
    """Power transmission past a taper-coupled resonance.

    Vectorized over ``delta_omega``; always in [0, 1].
    """
    if not kappa0 > 0:
        raise ValueError(f"kappa0 must be positive, got {kappa0}")
    if not kappa_ext >= 0:
        raise ValueError(f"kappa_ext must be non-negative, got {kappa_ext}")
    d = np.asarray(delta_omega, dtype=float)
    num = d**2 + 0.25 * (kappa0 - kappa_ext) ** 2
    den = d**2 + 0.25 * (kappa0 + kappa_ext) ** 2
    out = num / den
    return float(out) if out.ndim == 0 else out


def external_ratio_for_loss(loss: float, under_coupled: bool = True) -> float:
    """Ratio κe/κ0 giving an on-resonance power loss ``loss`` = 1 - T(0).

    Solves 4r/(1+r)² = loss. The under-coupled branch has r < 1.
    """
    if not 0 < loss <= 1:
        raise ValueError(f"loss must be in (0, 1], got {loss}")
    root = 2.0 * math.sqrt(1.0 - loss)
    if under_coupled:
        return ((2.0 - loss) - root) / loss
    return ((2.0 - loss) + root) / loss
