from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srlaser.collective import (
    DickeSpace,
    collective_liouvillian,
    collective_observables,
    collective_spin,
    dicke_state,
)
from srlaser.errors import ConfigurationError
from srlaser.geometry import build_geometry
from srlaser.model import ModelParams, liouvillian
from srlaser.observables import observables
from srlaser.operators import HilbertSpace
from srlaser.solvers import DensityMatrix, evolve, steady_state

from conftest import random_hermitian


def collective_params(**kw):
    base = dict(g=0.6, gamma0=0.2, pump_rate=1.0, detuning=0.2,
                decay_mode="fully_collective", pump_mode="collective")
    base.update(kw)
    return ModelParams(**base)


def symmetric_projector(space: HilbertSpace) -> np.ndarray:
    """Projector onto the symmetric atomic manifold times the Fock space."""
    n = space.n_atoms
    vecs = []
    for k in range(n + 1):
        atom = np.zeros(2**n)
        for exc in combinations(range(n), k):
            atom[sum(1 << i for i in exc)] = 1.0
        atom /= np.linalg.norm(atom)
        vecs.append(atom)
    basis = np.kron(np.array(vecs).T, np.eye(space.n_fock))
    return basis @ basis.T


def test_dims_and_spin_elements():
    space = DickeSpace(4, 3)
    assert space.dim == 5 * 4
    sp_ = collective_spin(DickeSpace(4, 0), "plus").toarray()
    j = 2.0
    for m in np.arange(-2, 2):
        k = int(m + j)
        assert abs(sp_[k + 1, k] - np.sqrt(j * (j + 1) - m * (m + 1))) < 1e-14
    sm = collective_spin(DickeSpace(4, 0), "minus").toarray()
    np.testing.assert_allclose(sm, sp_.conj().T)
    sz = collective_spin(DickeSpace(4, 0), "z").toarray()
    np.testing.assert_allclose(sp_ @ sm - sm @ sp_, 2 * sz, atol=1e-13)


def test_requires_collective_modes():
    with pytest.raises(ConfigurationError):
        collective_liouvillian(collective_params(pump_mode="individual"), DickeSpace(2, 2))
    with pytest.raises(ConfigurationError):
        collective_liouvillian(collective_params(decay_mode="independent"), DickeSpace(2, 2))


def test_observables_extremes():
    space = DickeSpace(5, 2)
    obs = collective_observables(dicke_state(space, -2.5), space)
    assert obs["inversion_per_atom"] == -1 and obs["photon_number"] == 0
    assert obs["g2_undefined"] and np.isnan(obs["g2_zero"])
    assert collective_observables(dicke_state(space, 2.5), space)["inversion_per_atom"] == 1


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.floats(0, 2), st.floats(0.01, 1), st.floats(0, 3),
       st.floats(-2, 2), st.integers(0, 2**32 - 1))
def test_trace_and_hermiticity(n, g, gam, r, dl, seed):
    space = DickeSpace(n, 2)
    L = collective_liouvillian(collective_params(g=g, gamma0=gam, pump_rate=r, detuning=dl), space)
    rho = random_hermitian(np.random.default_rng(seed), space.dim)
    out = L.apply(rho)
    assert abs(np.trace(out)) < 1e-12 * space.dim * max(1.0, np.abs(rho).max())
    assert np.max(np.abs(out - out.conj().T)) < 1e-12 * max(1.0, np.abs(rho).max())


def test_single_atom_matches_full():
    p = collective_params(geometry=build_geometry("chain", 1, 1.0))
    ds, hs = DickeSpace(1, 6), HilbertSpace(1, 6)
    rc = steady_state(collective_liouvillian(p, ds))
    rf = steady_state(liouvillian(p, hs))
    # the two bases coincide for one atom
    np.testing.assert_allclose(rc.data, rf.data, atol=1e-10)


@pytest.mark.parametrize("n", [2, 3])
def test_reduced_matches_full(n):
    p = collective_params(geometry=build_geometry("chain", n, 0.3))
    ds, hs = DickeSpace(n, 8), HilbertSpace(n, 8)
    oc = collective_observables(steady_state(collective_liouvillian(p, ds)), ds)
    ground = DensityMatrix(hs, np.diag(np.eye(hs.dim)[0]).astype(complex))
    of = observables(steady_state(liouvillian(p, hs), initial=ground), hs)
    assert abs(oc["photon_number"] - of.photon_number) < 1e-8
    assert abs(oc["inversion_per_atom"] - of.inversion) < 1e-8
    assert abs(oc["g2_zero"] - of.g2_zero) < 1e-8


@pytest.mark.filterwarnings("ignore::srlaser.errors.TruncationWarning")
def test_collective_channels_preserve_symmetric_manifold():
    n = 3
    p = collective_params(geometry=build_geometry("chain", n, 0.3))
    hs = HilbertSpace(n, 4)
    L = liouvillian(p, hs)
    rho0 = np.zeros((hs.dim, hs.dim), complex)
    rho0[hs.index(0b111, 0), hs.index(0b111, 0)] = 1.0
    proj = symmetric_projector(hs)
    states = evolve(L, rho0, np.linspace(0, 10, 6), method="expm")
    for rho in states:
        assert abs(1 - np.trace(proj @ rho @ proj).real) < 1e-12
    ground = DensityMatrix(hs, np.diag(np.eye(hs.dim)[0]).astype(complex))
    rss = steady_state(L, initial=ground)
    assert abs(1 - np.trace(proj @ rss.data @ proj).real) < 1e-12


def burst_peak(n: int) -> float:
    """Peak of -d<Sz>/dt for free collective decay from full inversion."""
    p = collective_params(g=0.0, gamma0=1.0, pump_rate=0.0, detuning=0.0)
    space = DickeSpace(n, 0)
    L = collective_liouvillian(p, space)
    sz = collective_spin(space, "z").toarray()
    t = np.linspace(0, 4.0, 801)
    states = evolve(L, dicke_state(space, n / 2), t, method="expm")
    rates = [-np.trace(sz @ L.apply(rho)).real for rho in states]
    return max(rates)


def test_burst_peak_grows_superlinearly():
    assert burst_peak(8) / burst_peak(4) > 2
