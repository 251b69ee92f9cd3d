"""Composite atoms-times-cavity Hilbert space and sparse operators on it.

Basis ordering is frozen because state vectors are serialized:

    index = atom_bits * (n_max + 1) + n_photons

Atom ``i`` contributes bit ``i`` (1 = excited) and atom 0 is the least
significant bit.  The ground state of every atom is bit value 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from numbers import Number
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, SpaceMismatchError

__all__ = [
    "HilbertSpace",
    "SparseOperator",
    "sigma_plus",
    "sigma_minus",
    "sigma_z",
    "annihilation",
    "creation",
    "identity",
    "number",
    "compose",
]

# single two-level factor, ordering (g, e)
_SP = sp.csr_matrix(np.array([[0, 0], [1, 0]], dtype=complex))
_SM = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))
_SZ = sp.csr_matrix(np.diag([-1.0, 1.0]).astype(complex))


@dataclass(frozen=True)
class HilbertSpace:
    n_atoms: int
    fock_cutoff: int

    def __post_init__(self):
        if self.n_atoms < 0 or self.fock_cutoff < 0:
            raise ConfigurationError("n_atoms and fock_cutoff must be non-negative")

    @property
    def n_fock(self) -> int:
        return self.fock_cutoff + 1

    @property
    def dim(self) -> int:
        return 2**self.n_atoms * self.n_fock

    @cached_property
    def photon_numbers(self) -> np.ndarray:
        return np.tile(np.arange(self.n_fock), 2**self.n_atoms)

    @cached_property
    def atom_bits(self) -> np.ndarray:
        return np.repeat(np.arange(2**self.n_atoms), self.n_fock)

    @cached_property
    def excitations(self) -> np.ndarray:
        """Photon number plus number of excited atoms for every basis state."""
        bits = np.arange(2**self.n_atoms)
        popcount = np.array([bin(b).count("1") for b in bits], dtype=int)
        return np.repeat(popcount, self.n_fock) + self.photon_numbers

    def index(self, atom_bits: int, n_photons: int) -> int:
        return atom_bits * self.n_fock + n_photons

    def basis_state(self, atom_bits: int, n_photons: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(atom_bits, n_photons)] = 1.0
        return v

    def embed_atoms(self, atom_op) -> sp.csr_matrix:
        """Atomic operator on the 2**N factor, identity on the cavity."""
        return sp.kron(atom_op, sp.identity(self.n_fock, dtype=complex), format="csr")

    def embed_cavity(self, cavity_op) -> sp.csr_matrix:
        return sp.kron(sp.identity(2**self.n_atoms, dtype=complex), cavity_op, format="csr")

    def describe(self) -> dict:
        return {"kind": "atoms", "n_atoms": self.n_atoms, "fock_cutoff": self.fock_cutoff}


class SparseOperator:
    """Complex sparse matrix bound to a Hilbert space.

    Supports ``+``, ``-``, ``*`` by scalars, ``@`` (operator product) and
    ``.dag()`` (conjugate transpose).  Operands must live on equal spaces.
    """

    __array_priority__ = 100

    def __init__(self, space, entries):
        m = sp.csr_matrix(entries, dtype=complex)
        if m.shape != (space.dim, space.dim):
            raise SpaceMismatchError(f"matrix shape {m.shape} does not match dim {space.dim}")
        m.sum_duplicates()
        m.eliminate_zeros()
        self.space = space
        self.entries = m

    def _check(self, other: "SparseOperator"):
        if not isinstance(other, SparseOperator):
            return NotImplemented
        if other.space != self.space:
            raise SpaceMismatchError(f"{self.space} vs {other.space}")

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SparseOperator(self.space, self.entries + other.entries)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SparseOperator(self.space, self.entries - other.entries)

    def __neg__(self):
        return SparseOperator(self.space, -self.entries)

    def __mul__(self, scalar):
        if not isinstance(scalar, Number):
            return NotImplemented
        return SparseOperator(self.space, self.entries * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            self._check(other)
            return SparseOperator(self.space, self.entries @ other.entries)
        return self.entries @ other

    def dag(self) -> "SparseOperator":
        return SparseOperator(self.space, self.entries.conj().T)

    def toarray(self) -> np.ndarray:
        return self.entries.toarray()

    @property
    def nnz(self) -> int:
        return self.entries.nnz

    def trace(self) -> complex:
        return complex(self.entries.diagonal().sum())

    def expect(self, rho: np.ndarray) -> complex:
        """``Tr[O rho]`` for a dense ``dim x dim`` matrix."""
        rho = np.asarray(rho)
        # Tr[O rho] = sum_ij O_ij rho_ji
        coo = self.entries.tocoo()
        return complex(np.sum(coo.data * rho[coo.col, coo.row]))

    def to_triplets(self) -> list[tuple[int, int, float, float]]:
        coo = self.entries.tocoo()
        return [(int(r), int(c), float(v.real), float(v.imag))
                for r, c, v in zip(coo.row, coo.col, coo.data)]

    def dump(self, path) -> None:
        """Write ``{"space": ..., "triplets": [[row, col, re, im], ...]}`` as JSON."""
        payload = {"space": self.space.describe(), "dim": self.space.dim,
                   "triplets": [list(t) for t in self.to_triplets()]}
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path, space) -> "SparseOperator":
        payload = json.loads(Path(path).read_text())
        t = np.asarray(payload["triplets"], dtype=float).reshape(-1, 4)
        m = sp.coo_matrix((t[:, 2] + 1j * t[:, 3], (t[:, 0].astype(int), t[:, 1].astype(int))),
                          shape=(space.dim, space.dim))
        return cls(space, m)

    def __repr__(self):
        return f"SparseOperator(dim={self.space.dim}, nnz={self.nnz})"


def _single_site(space: HilbertSpace, i: int, op) -> SparseOperator:
    if not 0 <= i < space.n_atoms:
        raise IndexError(f"atom index {i} out of range for {space.n_atoms} atoms")
    n = space.n_atoms
    left = sp.identity(2 ** (n - 1 - i), dtype=complex)
    right = sp.identity(2**i, dtype=complex)
    atom_op = sp.kron(sp.kron(left, op), right)
    return SparseOperator(space, space.embed_atoms(atom_op))


def sigma_plus(space: HilbertSpace, i: int) -> SparseOperator:
    return _single_site(space, i, _SP)


def sigma_minus(space: HilbertSpace, i: int) -> SparseOperator:
    return _single_site(space, i, _SM)


def sigma_z(space: HilbertSpace, i: int) -> SparseOperator:
    return _single_site(space, i, _SZ)


def _fock_lowering(n_fock: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n_fock, dtype=float)), 1,
                    shape=(n_fock, n_fock), dtype=complex, format="csr")


def annihilation(space) -> SparseOperator:
    """Cavity lowering operator; ``a|n> = sqrt(n)|n-1>``."""
    return SparseOperator(space, space.embed_cavity(_fock_lowering(space.n_fock)))


def creation(space) -> SparseOperator:
    """Conjugate of :func:`annihilation`.

    Truncation makes ``a^dagger|n_max> = 0``, so ``[a, a^dagger]`` equals the
    identity only below the top Fock level.
    """
    return annihilation(space).dag()


def number(space) -> SparseOperator:
    return creation(space) @ annihilation(space)


def identity(space) -> SparseOperator:
    return SparseOperator(space, sp.identity(space.dim, dtype=complex, format="csr"))


def compose(*terms) -> SparseOperator:
    """Sum of products.

    Each term is an operator, or a tuple mixing scalars and operators whose
    elements are multiplied left to right, e.g.
    ``compose((2.0, sp_0, sm_1), (0.5j, a))``.
    """
    total = None
    for term in terms:
        factors = term if isinstance(term, tuple) else (term,)
        coeff = 1.0
        prod = None
        for f in factors:
            if isinstance(f, Number):
                coeff *= f
            elif prod is None:
                prod = f
            else:
                prod = prod @ f
        if prod is None:
            raise ConfigurationError("compose term without an operator")
        value = prod * coeff
        total = value if total is None else total + value
    if total is None:
        raise ConfigurationError("compose needs at least one term")
    return total
