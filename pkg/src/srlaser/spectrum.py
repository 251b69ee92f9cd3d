"""Cavity output spectrum and Lorentzian line analysis.

The spectrum is the one-sided transform

    S(omega) = 2 Re int_0^inf exp(-i omega tau) <a^dag(tau) a(0)> dtau,

with ``omega`` measured from the bare atomic frequency.  A correlation
``n0 exp((-kappa + i Delta) tau)`` therefore gives a Lorentzian of full width
``2 kappa`` centred at ``+Delta`` with peak ``2 n0 / kappa``.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from .errors import FitError, WindowingError, WindowingWarning
from .model import Superoperator
from .operators import annihilation, creation
from .solvers import Correlation

__all__ = [
    "SpectrumResult",
    "LorentzFit",
    "spectrum_fft",
    "spectrum_resolvent",
    "lorentz_fit",
    "lorentzian",
    "default_resolvent_grid",
]

UNRELIABLE_RESIDUAL = 0.05
SECONDARY_PEAK_FRACTION = 0.2


@dataclass
class SpectrumResult:
    omega: np.ndarray
    values: np.ndarray
    method: str
    window_metadata: dict = field(default_factory=dict)

    def integral(self) -> float:
        """``(1/2pi) int S domega``: trapezoid rule on the stored grid plus the
        analytic ``1/omega**2`` tail recorded as ``tail_mass``, if any."""
        if len(self.omega) < 2:
            return 0.0
        core = np.trapezoid(self.values, self.omega) / (2 * np.pi)
        return float(core + self.window_metadata.get("tail_mass", 0.0))

    def normalization_error(self, photon_number: float) -> float:
        if photon_number <= 0:
            return 0.0 if np.allclose(self.values, 0) else np.inf
        return abs(self.integral() - photon_number) / photon_number

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("omega_over_kappa,S\n")
            for w, s in zip(self.omega, self.values):
                fh.write(f"{float(w)!r},{float(s)!r}\n")


def spectrum_fft(corr, tau=None, *, pad_factor: int = 4, decay_tol: float = 1e-4,
                 strict: bool = True) -> SpectrumResult:
    """Spectrum from uniformly sampled correlation values by FFT.

    The samples are joined by straight lines and that interpolant is
    transformed exactly, which multiplies the FFT by the attenuation factor
    ``(sin(theta/2)/(theta/2))**2`` with ``theta = omega*dtau`` plus an
    endpoint correction at ``tau = 0``.  The grid is zero-padded to a power
    of two of at least ``pad_factor`` times its length.  The spectral weight
    beyond the Nyquist frequency, ``S ~ -2 Re g'(0)/omega**2``, is stored
    as ``window_metadata["tail_mass"]`` for normalization checks.

    Raises :class:`WindowingError` if ``|g(tau_end)| >= decay_tol*|g(0)|``
    unless ``strict`` is false, in which case the result is flagged instead.
    """
    if isinstance(corr, Correlation):
        tau = corr.tau if tau is None else tau
        values = corr.values
    else:
        values = np.asarray(corr, dtype=complex)
    tau = np.asarray(tau, dtype=float)
    if len(tau) != len(values) or len(tau) < 2:
        raise ValueError("correlation and tau grid must have equal length >= 2")
    dt = tau[1] - tau[0]
    if not np.allclose(np.diff(tau), dt, rtol=1e-9, atol=0) or tau[0] != 0:
        raise ValueError("tau grid must be uniform and start at 0")
    g0 = abs(values[0])
    truncated = bool(g0 > 0 and abs(values[-1]) >= decay_tol * g0)
    if truncated:
        msg = (f"correlation not decayed at tau_end={tau[-1]:g} "
               f"(|g_end|/|g0| = {abs(values[-1]) / g0:.2e}); extend the tau grid")
        if strict:
            raise WindowingError(msg)
        warnings.warn(msg, WindowingWarning, stacklevel=2)
    n_pad = 1 << int(np.ceil(np.log2(max(pad_factor, 1) * len(values))))
    omega = 2 * np.pi * np.fft.fftfreq(n_pad, d=dt)
    weight, edge = _linear_weights(omega * dt)
    transform = dt * (weight * np.fft.fft(values, n_pad) + (edge - weight) * values[0])
    s = 2.0 * transform.real
    order = np.argsort(omega, kind="stable")
    slope = (values[1] - values[0]) / dt
    nyquist = np.pi / dt
    meta = {"tau_end": float(tau[-1]), "tau_step": float(dt), "n_pad": n_pad,
            "truncated": truncated,
            "tail_mass": float(-2.0 * slope.real / (np.pi * nyquist))}
    return SpectrumResult(omega[order], s[order], "fft_time_domain", meta)


def _linear_weights(theta):
    """Attenuation factor and ``tau = 0`` end weight for linear interpolation."""
    small = np.abs(theta) < 1e-3
    t = np.where(small, 1.0, theta)
    weight = np.where(small, 1 - theta**2 / 12, 2 * (1 - np.cos(t)) / t**2)
    edge = np.where(small, 0.5 - 1j * theta / 6 - theta**2 / 24,
                    -1j / t + (1 - np.exp(-1j * t)) / t**2)
    return weight, edge


def default_resolvent_grid(center: float = 0.0, half_width: float = 10.0,
                           n_points: int = 801) -> np.ndarray:
    return np.linspace(center - half_width, center + half_width, n_points)


def spectrum_resolvent(L: Superoperator, rho_ss, omega_grid) -> SpectrumResult:
    """Frequency-domain spectrum ``2 Re Tr[a^dag (i omega - L)^-1 (a rho)]``.

    Each frequency is an independent sparse solve restricted to the
    excitation sector of ``a rho``.  Frequencies where the factorization is
    singular are skipped and listed in ``window_metadata["skipped"]``.
    """
    space = L.space
    data = getattr(rho_ss, "data", rho_ss)
    a = annihilation(space).entries
    ad = creation(space).entries
    x0 = (a @ np.asarray(data)).reshape(-1, order="F")
    weights = np.asarray(ad.T.toarray()).reshape(-1, order="F")
    omega = np.asarray(omega_grid, dtype=float)
    values = np.zeros(len(omega))
    skipped = []
    nz = np.abs(x0) > 0
    if nz.any():
        if L.conserves_sectors():
            ks = np.unique(L._exc_difference[nz])
            idx = np.concatenate([L.sector_indices(int(k)) for k in ks])
        else:
            idx = np.arange(x0.size)
        block = L.matrix[idx][:, idx].tocsc()
        eye = sp.identity(len(idx), dtype=complex, format="csc")
        y0, w = x0[idx], weights[idx]
        for m, om in enumerate(omega):
            try:
                x = spla.splu((1j * om * eye - block).tocsc()).solve(y0)
            except RuntimeError:
                skipped.append(float(om))
                values[m] = np.nan
                continue
            values[m] = 2.0 * np.real(w @ x)
    meta = {"omega_min": float(omega.min()), "omega_max": float(omega.max()),
            "n_points": int(len(omega)), "skipped": skipped}
    return SpectrumResult(omega, values, "resolvent", meta)


def lorentzian(omega, amplitude, center, width, baseline=0.0):
    """``amplitude*(width/2)**2/((omega-center)**2+(width/2)**2) + baseline``."""
    hw2 = (0.5 * width) ** 2
    return amplitude * hw2 / ((omega - center) ** 2 + hw2) + baseline


@dataclass
class LorentzFit:
    linewidth: float
    center_shift: float
    amplitude: float
    baseline: float
    fit_residual: float
    unreliable: bool
    multi_peak: bool
    atom_laser_detuning: float | None = None
    shift_vs_cavity: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _half_max_width(omega, values, peak):
    half = values[peak] / 2.0
    left = peak
    while left > 0 and values[left] > half:
        left -= 1
    right = peak
    while right < len(values) - 1 and values[right] > half:
        right += 1

    def cross(i, j):
        vi, vj = values[i], values[j]
        if vj == vi:
            return omega[i]
        return omega[i] + (half - vi) * (omega[j] - omega[i]) / (vj - vi)

    lo = cross(left, left + 1) if left < peak else omega[peak]
    hi = cross(right - 1, right) if right > peak else omega[peak]
    step = np.min(np.diff(omega)) if len(omega) > 1 else 1.0
    return max(hi - lo, step)


def lorentz_fit(spec: SpectrumResult, *, gamma0: float | None = None,
                detuning: float | None = None, window_widths: float = 5.0,
                iterations: int = 2) -> LorentzFit:
    """Least-squares Lorentzian plus constant baseline around the main peak.

    The fit window is ``center +- window_widths * linewidth``, re-centred on
    the previous fit ``iterations`` times.  Width and centre are returned in
    the units of ``spec.omega``; ``atom_laser_detuning = -center/gamma0`` when
    ``gamma0`` is given and ``shift_vs_cavity = center - detuning`` when the
    cavity detuning is given.
    """
    omega = np.asarray(spec.omega, dtype=float)
    values = np.asarray(spec.values, dtype=float)
    ok = np.isfinite(values)
    omega, values = omega[ok], values[ok]
    if len(values) < 5 or not np.max(values) > 0:
        raise FitError("spectrum has no positive peak to fit")
    peak = int(np.argmax(values))
    vmax = values[peak]
    peaks, _ = find_peaks(values, height=SECONDARY_PEAK_FRACTION * vmax)
    multi_peak = bool(np.sum(peaks != peak) > 0)

    params = np.array([vmax, omega[peak], _half_max_width(omega, values, peak), 0.0])
    scale = vmax

    def residual(p, w, v):
        return (lorentzian(w, *p) - v) / scale

    for _ in range(max(iterations, 1)):
        center, width = params[1], abs(params[2])
        sel = np.abs(omega - center) <= window_widths * width
        if np.count_nonzero(sel) < 5:
            order = np.argsort(np.abs(omega - center))[:9]
            sel = np.zeros_like(sel)
            sel[order] = True
        result = least_squares(residual, params, args=(omega[sel], values[sel]),
                               method="lm", xtol=1e-10, ftol=1e-14, gtol=1e-14,
                               max_nfev=20000)
        if not result.success:
            raise FitError(f"Lorentzian fit did not converge: {result.message}")
        params = result.x
        params[2] = abs(params[2])

    res = residual(params, omega[sel], values[sel]) * scale
    rel_rms = float(np.sqrt(np.mean(res**2)) / max(abs(params[0]), 1e-300))
    amp, center, width, base = (float(x) for x in params)
    if not width > 0:
        raise FitError("fitted linewidth is not positive")
    return LorentzFit(
        linewidth=width,
        center_shift=center,
        amplitude=amp,
        baseline=base,
        fit_residual=rel_rms,
        unreliable=rel_rms > UNRELIABLE_RESIDUAL or multi_peak,
        multi_peak=multi_peak,
        atom_laser_detuning=(-center / gamma0) if gamma0 else None,
        shift_vs_cavity=(center - detuning) if detuning is not None else None,
    )
