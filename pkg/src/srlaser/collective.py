"""Reduced model for fully collective decay and pumping.

With all decay and pump channels collective, the total spin is conserved and
the symmetric manifold ``|J=N/2, m>`` of dimension ``N+1`` suffices.  The
basis index is ``(m + J) * (n_max + 1) + n``; index 0 is all atoms in the
ground state with an empty cavity.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError
from .model import DecayMode, ModelParams, PumpMode, Superoperator, lindblad_superoperator
from .observables import G2_UNDEFINED_BELOW
from .operators import SparseOperator, annihilation

__all__ = ["DickeSpace", "collective_spin", "collective_liouvillian",
           "collective_observables", "dicke_state"]


@dataclass(frozen=True)
class DickeSpace:
    n_atoms: int
    fock_cutoff: int

    def __post_init__(self):
        if self.n_atoms < 0 or self.fock_cutoff < 0:
            raise ConfigurationError("n_atoms and fock_cutoff must be non-negative")

    @property
    def n_fock(self) -> int:
        return self.fock_cutoff + 1

    @property
    def n_spin(self) -> int:
        return self.n_atoms + 1

    @property
    def j(self) -> float:
        return self.n_atoms / 2.0

    @property
    def dim(self) -> int:
        return self.n_spin * self.n_fock

    @cached_property
    def photon_numbers(self) -> np.ndarray:
        return np.tile(np.arange(self.n_fock), self.n_spin)

    @cached_property
    def m_values(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_spin) - self.j, self.n_fock)

    @cached_property
    def excitations(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_spin), self.n_fock) + self.photon_numbers

    def embed_cavity(self, cavity_op) -> sp.csr_matrix:
        return sp.kron(sp.identity(self.n_spin, dtype=complex), cavity_op, format="csr")

    def index(self, m: float, n_photons: int) -> int:
        return int(round(m + self.j)) * self.n_fock + n_photons

    def describe(self) -> dict:
        return {"kind": "dicke", "n_atoms": self.n_atoms, "fock_cutoff": self.fock_cutoff}


def _spin_raising(n_atoms: int) -> sp.csr_matrix:
    j = n_atoms / 2.0
    m = np.arange(n_atoms) - j  # m -> m + 1 for m = -J .. J-1
    elems = np.sqrt(j * (j + 1) - m * (m + 1))
    return sp.diags(elems, -1, shape=(n_atoms + 1,) * 2, dtype=complex, format="csr")


def collective_spin(space: DickeSpace, which: str) -> SparseOperator:
    """``S+``, ``S-`` or ``Sz`` embedded in the spin-times-Fock space."""
    raising = _spin_raising(space.n_atoms)
    op = {
        "plus": raising,
        "minus": raising.conj().T,
        "z": sp.diags(np.arange(space.n_spin) - space.j, 0, dtype=complex),
    }[which]
    return SparseOperator(space, sp.kron(op, sp.identity(space.n_fock, dtype=complex),
                                         format="csr"))


def collective_liouvillian(params: ModelParams, space: DickeSpace) -> Superoperator:
    """Generator on the symmetric manifold.

    ``H = Delta a^dag a + g (a S+ + a^dag S-)``, decay ``gamma0`` through
    ``S-``, pump ``pump_rate`` through ``S+`` and cavity loss as in the full
    model.  The atom number is taken from ``space``; ``params.geometry`` is
    ignored.  Dipole-dipole shifts are absent in this model.
    """
    if params.decay_mode is not DecayMode.FULLY_COLLECTIVE or \
            params.pump_mode is not PumpMode.COLLECTIVE:
        raise ConfigurationError(
            "the reduced model needs decay_mode=fully_collective and pump_mode=collective")
    a = annihilation(space).entries
    ad = a.conj().T
    s_plus = collective_spin(space, "plus").entries
    s_minus = collective_spin(space, "minus").entries
    h = params.detuning * (ad @ a) + params.g * (a @ s_plus + ad @ s_minus)
    channels = [
        (params.gamma0, s_minus, s_minus),
        (params.pump_rate, s_plus, s_plus),
        (2.0 * params.kappa, a, a),
    ]
    return lindblad_superoperator(space, h, channels)


def dicke_state(space: DickeSpace, m: float, n_photons: int = 0) -> np.ndarray:
    """Density matrix of ``|J, m> (x) |n>``."""
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    k = space.index(m, n_photons)
    rho[k, k] = 1.0
    return rho


def collective_observables(rho, space: DickeSpace) -> dict:
    """Photon number, ``2<Sz>/N`` and g2(0) (NaN and flagged for an empty cavity)."""
    d = np.asarray(getattr(rho, "data", rho))
    pops = np.real(np.diag(d))
    nn = space.photon_numbers
    n = float(np.sum(pops * nn))
    inv = float(np.sum(pops * space.m_values) / space.j) if space.n_atoms else float("nan")
    undefined = n < G2_UNDEFINED_BELOW
    g2 = float("nan") if undefined else float(np.sum(pops * nn * (nn - 1)) / n**2)
    return {"photon_number": n, "inversion_per_atom": inv, "g2_zero": g2,
            "g2_undefined": undefined}
