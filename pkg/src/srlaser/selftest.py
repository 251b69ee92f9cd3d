"""Quick randomized consistency battery used by ``srlaser selftest``."""

from __future__ import annotations

import numpy as np

from .geometry import build_geometry
from .model import ModelParams, liouvillian
from .observables import inversion
from .operators import HilbertSpace
from .solvers import correlation_adag_a, steady_state
from .spectrum import lorentz_fit, spectrum_fft


def _random_hermitian(rng, d):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return m + m.conj().T


def run_selftest(seed: int = 0, verbose: bool = True) -> bool:
    rng = np.random.default_rng(seed)
    checks = []

    geom = build_geometry("chain", 2, float(rng.uniform(0.05, 1.0)))
    params = ModelParams(g=float(rng.uniform(0.1, 1.5)), gamma0=float(rng.uniform(0.05, 1)),
                         pump_rate=float(rng.uniform(0, 3)), detuning=float(rng.normal()),
                         geometry=geom)
    space = HilbertSpace(2, 2)
    L = liouvillian(params, space)
    worst_tr = worst_h = 0.0
    for _ in range(20):
        rho = _random_hermitian(rng, space.dim)
        out = L.apply(rho)
        worst_tr = max(worst_tr, abs(np.trace(out)))
        worst_h = max(worst_h, np.max(np.abs(out - out.conj().T)))
    checks.append(("trace preservation", worst_tr < 1e-12, worst_tr))
    checks.append(("hermiticity preservation", worst_h < 1e-12, worst_h))

    r, gam = rng.uniform(0.1, 2, size=2)
    single = ModelParams(g=0.0, gamma0=float(gam), pump_rate=float(r),
                         geometry=build_geometry("chain", 1, 1.0))
    sp1 = HilbertSpace(1, 1)
    rho = steady_state(liouvillian(single, sp1))
    err = abs(inversion(rho, sp1) - (r - gam) / (r + gam))
    checks.append(("single-atom pump balance", err < 1e-10, err))

    delta = float(rng.uniform(-1, 1))
    cav = ModelParams(detuning=delta, geometry=build_geometry("chain", 0, 1.0))
    sp0 = HilbertSpace(0, 3)
    seed_state = np.diag([0.9, 0.1, 0, 0]).astype(complex)
    fit = lorentz_fit(spectrum_fft(correlation_adag_a(liouvillian(cav, sp0), seed_state)))
    checks.append(("empty-cavity linewidth 2 kappa", abs(fit.linewidth / 2 - 1) < 0.01,
                   fit.linewidth))

    ok = all(c[1] for c in checks)
    if verbose:
        for name, passed, value in checks:
            print(f"{'PASS' if passed else 'FAIL'}  {name}  ({value:.3g})")
    return ok
