import numpy as np
import pytest

from srlaser.geometry import build_geometry
from srlaser.model import ModelParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_params(rng, n_atoms=2, **fixed):
    """Random but physically valid parameters for small systems."""
    kw = dict(
        g=float(rng.uniform(0.1, 1.5)),
        gamma0=float(rng.uniform(0.05, 1.0)),
        pump_rate=float(rng.uniform(0.1, 3.0)),
        detuning=float(rng.uniform(-1.0, 1.0)),
        geometry=build_geometry("chain", n_atoms, float(rng.uniform(0.05, 1.0))),
    )
    kw.update(fixed)
    return ModelParams(**kw)


def random_density(rng, d, rank=None):
    m = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, d):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return m + m.conj().T
