import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srlaser.errors import FitError, WindowingError, WindowingWarning
from srlaser.geometry import build_geometry
from srlaser.model import ModelParams, liouvillian
from srlaser.observables import photon_number
from srlaser.operators import HilbertSpace
from srlaser.solvers import correlation_adag_a, steady_state
from srlaser.spectrum import (
    SpectrumResult,
    lorentz_fit,
    lorentzian,
    spectrum_fft,
    spectrum_resolvent,
)

TAU = np.arange(0, 40, 0.01)


def seeded_cavity(delta=0.0, kappa=1.0, n_max=3):
    space = HilbertSpace(0, n_max)
    p = ModelParams(kappa=kappa, detuning=delta, geometry=build_geometry("chain", 0, 1.0))
    rho = np.diag([0.85, 0.12, 0.03] + [0.0] * (n_max - 2)).astype(complex)
    return space, liouvillian(p, space), rho


def test_exponential_pair():
    n0, kappa = 0.7, 1.3
    spec = spectrum_fft(n0 * np.exp(-kappa * TAU), TAU)
    fit = lorentz_fit(spec)
    assert fit.linewidth == pytest.approx(2 * kappa, rel=1e-3)
    assert abs(fit.center_shift) < 1e-6
    assert spec.values.max() == pytest.approx(2 * n0 / kappa, rel=1e-3)
    assert spec.integral() == pytest.approx(n0, rel=1e-3)


@pytest.mark.parametrize("delta", [-0.8, 0.5])
def test_sign_convention(delta):
    spec = spectrum_fft(np.exp((-1 + 1j * delta) * TAU), TAU)
    assert lorentz_fit(spec).center_shift == pytest.approx(delta, abs=1e-4)


def test_zero_correlation():
    spec = spectrum_fft(np.zeros_like(TAU), TAU)
    assert np.all(spec.values == 0)
    with pytest.raises(FitError):
        lorentz_fit(spec)


def test_windowing_error():
    short = TAU[:200]
    g = np.exp(-short)
    with pytest.raises(WindowingError):
        spectrum_fft(g, short)
    with pytest.warns(WindowingWarning):
        spec = spectrum_fft(g, short, strict=False)
    assert spec.window_metadata["truncated"]


def test_grid_validation():
    with pytest.raises(ValueError):
        spectrum_fft(np.ones(5), np.array([0, 1, 2, 4, 5.0]))
    with pytest.raises(ValueError):
        spectrum_fft(np.ones(3), np.arange(4.0))


def test_exact_lorentzian_recovered():
    w = np.linspace(-10, 10, 4001)
    spec = SpectrumResult(w, lorentzian(w, 2.0, 0.1, 0.3), "synthetic")
    fit = lorentz_fit(spec, gamma0=0.2, detuning=0.5)
    assert fit.linewidth == pytest.approx(0.3, rel=1e-6)
    assert fit.center_shift == pytest.approx(0.1, rel=1e-6)
    assert fit.atom_laser_detuning == pytest.approx(-0.5, rel=1e-6)
    assert fit.shift_vs_cavity == pytest.approx(-0.4, rel=1e-6)
    assert fit.fit_residual < 1e-8 and not fit.unreliable


def test_two_peaks_flagged():
    w = np.linspace(-10, 10, 2001)
    spec = SpectrumResult(w, lorentzian(w, 1.0, -2, 0.5) + lorentzian(w, 0.8, 2, 0.5), "x")
    fit = lorentz_fit(spec)
    assert fit.multi_peak and fit.unreliable


@pytest.mark.parametrize("delta", [0.0, 0.4, -1.1])
def test_empty_cavity_linewidth(delta):
    space, L, rho = seeded_cavity(delta)
    corr = correlation_adag_a(L, rho)
    spec = spectrum_fft(corr)
    fit = lorentz_fit(spec)
    assert abs(fit.linewidth / 2 - 1) < 0.01
    assert abs(fit.center_shift - delta) < 1e-3
    assert spec.values.min() >= -1e-8 * spec.values.max()
    assert spec.normalization_error(photon_number(rho, space)) < 1e-2


def test_frame_covariance():
    eps = 0.37
    a = lorentz_fit(spectrum_fft(correlation_adag_a(*seeded_cavity(0.2)[1:])))
    b = lorentz_fit(spectrum_fft(correlation_adag_a(*seeded_cavity(0.2 + eps)[1:])))
    assert b.center_shift - a.center_shift == pytest.approx(eps, abs=1e-3)


def test_resolvent_matches_fft_empty_cavity():
    space, L, rho = seeded_cavity(0.0)
    fft = spectrum_fft(correlation_adag_a(L, rho))
    w = np.linspace(-8, 8, 161)
    res = spectrum_resolvent(L, rho, w)
    ref = np.interp(w, fft.omega, fft.values)
    mask = res.values > 0.01 * res.values.max()
    np.testing.assert_allclose(res.values[mask], ref[mask], rtol=1e-2)
    np.testing.assert_allclose(res.values, 2 * photon_number(rho, space) / (1 + w**2), rtol=1e-10)


def test_resolvent_tails_and_linearity():
    space, L, rho = seeded_cavity(0.0)
    res = spectrum_resolvent(L, rho, [0.0, 50.0])
    assert res.values[1] < 1e-3 * res.values[0]
    double = spectrum_resolvent(L, 2 * rho, [0.0, 50.0])
    np.testing.assert_allclose(double.values, 2 * res.values, rtol=1e-12)


@settings(max_examples=25)
@given(st.floats(0.2, 3.0), st.floats(-2, 2), st.floats(0.05, 5))
def test_fft_real_and_normalized(kappa, delta, n0):
    tau = np.arange(0, 20 / kappa, 0.02 / kappa)
    spec = spectrum_fft(n0 * np.exp((-kappa + 1j * delta) * tau), tau)
    assert np.isrealobj(spec.values)
    assert spec.values.min() >= -1e-8 * spec.values.max()
    assert spec.integral() == pytest.approx(n0, rel=1e-2)


def test_lasing_point_normalization():
    p = ModelParams(g=0.6, gamma0=0.2, pump_rate=1.5, geometry=build_geometry("square", 4, 0.58))
    space = HilbertSpace(4, 8)
    L = liouvillian(p, space)
    rho = steady_state(L)
    spec = spectrum_fft(correlation_adag_a(L, rho))
    assert spec.normalization_error(photon_number(rho, space)) < 1e-2


def test_write_csv(tmp_path):
    spec = SpectrumResult(np.array([-1.0, 0.0, 1.0]), np.array([0.5, 1.0, 0.5]), "x")
    spec.write_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "omega_over_kappa,S" and lines[2] == "0.0,1.0"
