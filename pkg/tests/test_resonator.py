import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qzbsim.resonator import (C_LIGHT, CavityMode, DiskSpec, detuning_nm_to_rad,
                              detuning_rad_to_nm, external_ratio_for_loss, fsr_wavelength,
                              lorentzian_transmission, q_from_linewidth)

kappas = st.floats(1e6, 1e12)


def test_q_from_linewidth_examples():
    assert q_from_linewidth(1546e-9, 0.06e-9) == pytest.approx(2.5767e4, rel=1e-4)
    assert round(q_from_linewidth(1546e-9, 0.06e-9), -2) == 25800
    assert q_from_linewidth(1550e-9, 1550e-9 * 1e-5) == pytest.approx(1e5, rel=1e-12)
    assert q_from_linewidth(773e-9, 0.06e-9) == pytest.approx(773 / 0.06, rel=1e-12)


@pytest.mark.parametrize("lam, dl", [(0, 1e-12), (1e-6, 0), (-1e-6, 1e-12), (1e-6, 2e-6)])
def test_q_from_linewidth_rejects(lam, dl):
    with pytest.raises(ValueError):
        q_from_linewidth(lam, dl)


def test_fsr_examples():
    assert fsr_wavelength(20e-6, 2.09, 1546e-9) == pytest.approx(9.10e-9, abs=0.005e-9)
    sh = fsr_wavelength(20e-6, 2.09, 773e-9)
    assert sh == pytest.approx(773e-9**2 / (2 * math.pi * 20e-6 * 2.09), rel=1e-14)
    assert sh == pytest.approx(2.27e-9, abs=0.01e-9)  # 2.275 nm
    assert fsr_wavelength(40e-6, 2.09, 1546e-9) == pytest.approx(
        fsr_wavelength(20e-6, 2.09, 1546e-9) / 2, rel=1e-14)
    with pytest.raises(ValueError):
        fsr_wavelength(0.0, 2.09, 1546e-9)
    with pytest.raises(ValueError):
        fsr_wavelength(20e-6, 0.0, 1546e-9)


def test_group_index_roundtrip_from_measured_fsr():
    # invert the measured 9.1 nm spacing for n_g, then recompute it
    n_g = (1546e-9) ** 2 / (2 * math.pi * 20e-6 * 9.1e-9)
    assert fsr_wavelength(20e-6, n_g, 1546e-9) == pytest.approx(9.1e-9, rel=1e-12)
    assert n_g == pytest.approx(2.09, abs=0.005)


def test_transmission_examples():
    k0 = 1.0
    assert lorentzian_transmission(0.0, k0, 0.1716 * k0) == pytest.approx(0.500, abs=5e-4)
    assert lorentzian_transmission(0.0, k0, k0) == 0.0
    assert lorentzian_transmission(0.0, k0, 0.1193 * k0) == pytest.approx(0.619, abs=5e-4)


def test_external_ratio_for_loss():
    # independent oracle: solve ((1-r)/(1+r))^2 = 1 - L by bisection
    for loss in (0.381, 0.5, 0.9):
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if ((1 - mid) / (1 + mid)) ** 2 > 1 - loss:
                lo = mid
            else:
                hi = mid
        assert external_ratio_for_loss(loss) == pytest.approx(lo, rel=1e-12)
    assert external_ratio_for_loss(0.5) == pytest.approx(0.1716, abs=1e-4)
    assert external_ratio_for_loss(0.381) == pytest.approx(0.1193, abs=1e-4)
    r_over = external_ratio_for_loss(0.381, under_coupled=False)
    assert r_over > 1
    assert r_over == pytest.approx(1 / external_ratio_for_loss(0.381), rel=1e-12)
    with pytest.raises(ValueError):
        external_ratio_for_loss(0.0)


@given(kappas, st.floats(0, 1e12), st.floats(-1e13, 1e13))
def test_transmission_properties(k0, ke, d):
    t = lorentzian_transmission(d, k0, ke)
    assert 0.0 <= t <= 1.0
    assert t == lorentzian_transmission(-d, k0, ke)
    t0 = lorentzian_transmission(0.0, k0, ke)
    assert t0 == pytest.approx(((k0 - ke) / (k0 + ke)) ** 2, rel=1e-12, abs=1e-300)
    assert t >= t0 * (1 - 1e-12)


@given(kappas, st.floats(0, 1e12))
def test_transmission_monotone_in_abs_detuning(k0, ke):
    d = np.linspace(0, 10 * (k0 + ke), 200)
    t = lorentzian_transmission(d, k0, ke)
    assert np.all(np.diff(t) >= -1e-15)
    assert lorentzian_transmission(1e6 * (k0 + ke), k0, ke) == pytest.approx(1.0, abs=1e-9)


def test_transmission_is_vectorized():
    out = lorentzian_transmission(np.array([0.0, 1.0]), 1.0, 0.5)
    assert isinstance(out, np.ndarray) and out.shape == (2,)
    assert isinstance(lorentzian_transmission(0.0, 1.0, 0.5), float)


@given(st.floats(1e-7, 1e-5), kappas, st.floats(0, 1e12))
def test_q_roundtrip_through_mode(lam, k0, ke):
    mode = CavityMode(lam, k0, ke)
    assert q_from_linewidth(lam, mode.linewidth) == pytest.approx(mode.q_loaded, rel=1e-12)


def test_mode_from_q():
    m = CavityMode.from_q(1545.9e-9, 2.6e4, 0.1193)
    assert m.q_loaded == pytest.approx(2.6e4, rel=1e-12)
    assert m.kappa_ext / m.kappa0 == pytest.approx(0.1193, rel=1e-12)
    assert m.transmission(0.0) == pytest.approx(0.619, abs=5e-4)


@pytest.mark.parametrize("kw", [dict(lambda0=0.0, kappa0=1.0), dict(lambda0=1e-6, kappa0=0.0),
                                dict(lambda0=1e-6, kappa0=1.0, kappa_ext=-1.0),
                                dict(lambda0=1e-6, kappa0=1.0, pol="X"),
                                dict(lambda0=1e-6, kappa0=1.0, m_azimuthal=1.5)])
def test_mode_invariants(kw):
    with pytest.raises(ValueError):
        CavityMode(**kw)


def test_disk_invariants():
    with pytest.raises(ValueError):
        DiskSpec(0.0, 200e-9)
    with pytest.raises(ValueError):
        DiskSpec(20e-6, -1.0)


def test_detuning_sign_convention():
    lam = 1545.9e-9
    d = detuning_nm_to_rad(-0.01, lam)
    assert d > 0  # blue
    assert d == pytest.approx(2 * math.pi * C_LIGHT * 0.01e-9 / lam**2, rel=1e-14)
    assert detuning_rad_to_nm(d, lam) == pytest.approx(-0.01, rel=1e-14)
