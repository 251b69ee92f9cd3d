"""Rotating-frame Hamiltonian and Liouvillian of the lattice laser.

All rates are in units of the cavity decay rate and frequencies are measured
from the bare atomic transition.  The cavity dissipator is
``kappa*(2 a rho a^dag - {a^dag a, rho})``: the field amplitude decays at
``kappa``, the photon number at ``2*kappa`` and the empty-cavity line has a
full width of ``2*kappa``.

Density matrices are vectorized by column stacking, ``vec(rho)[j*d + i] =
rho[i, j]``, so ``vec(A rho B) = kron(B.T, A) vec(rho)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, SpaceMismatchError
from .geometry import Geometry, build_geometry, coupling_matrices
from .operators import (
    HilbertSpace,
    SparseOperator,
    annihilation,
    creation,
    sigma_minus,
    sigma_plus,
)

__all__ = [
    "DecayMode",
    "PumpMode",
    "ModelParams",
    "Superoperator",
    "effective_couplings",
    "hamiltonian",
    "liouvillian",
    "lindblad_superoperator",
    "apply",
]


class DecayMode(str, Enum):
    FULL_GEOMETRY = "full_geometry"
    INDEPENDENT = "independent"
    FULLY_COLLECTIVE = "fully_collective"


class PumpMode(str, Enum):
    INDIVIDUAL = "individual"
    COLLECTIVE = "collective"


def _default_geometry() -> Geometry:
    return build_geometry("chain", 1, 1.0)


@dataclass(frozen=True)
class ModelParams:
    g: float = 1.0
    kappa: float = 1.0
    gamma0: float = 0.0
    pump_rate: float = 0.0
    detuning: float = 0.0
    decay_mode: DecayMode = DecayMode.FULL_GEOMETRY
    pump_mode: PumpMode = PumpMode.INDIVIDUAL
    geometry: Geometry = field(default_factory=_default_geometry)

    def __post_init__(self):
        object.__setattr__(self, "decay_mode", DecayMode(self.decay_mode))
        object.__setattr__(self, "pump_mode", PumpMode(self.pump_mode))
        for name in ("g", "kappa", "gamma0", "pump_rate", "detuning"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v}")
        if not self.kappa > 0:
            raise DomainError("kappa must be > 0")
        for name in ("g", "gamma0", "pump_rate"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")

    @property
    def n_atoms(self) -> int:
        return self.geometry.n_atoms

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "geometry"}
        d["decay_mode"] = self.decay_mode.value
        d["pump_mode"] = self.pump_mode.value
        d["geometry"] = self.geometry.to_dict()
        return d


def effective_couplings(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Decay matrix and dipole-dipole shift matrix actually used by the model."""
    n = params.n_atoms
    g0 = params.gamma0
    if params.decay_mode is DecayMode.INDEPENDENT:
        return g0 * np.eye(n), np.zeros((n, n))
    if params.decay_mode is DecayMode.FULLY_COLLECTIVE:
        return g0 * np.ones((n, n)), np.zeros((n, n))
    if g0 == 0 or n == 0:
        return np.zeros((n, n)), np.zeros((n, n))
    cm = coupling_matrices(params.geometry, g0)
    return cm.gamma, cm.omega


class Superoperator:
    """Sparse generator acting on column-stacked density matrices.

    Built from a left-multiplication operator ``K``, a right-multiplication
    operator ``Kr`` and sandwich terms ``c * A rho B``:

        L[rho] = K rho + rho Kr + sum_k c_k A_k rho B_k

    The sparse matrix is assembled once; :meth:`apply` uses the same terms
    without it, for matrix-free use.
    """

    def __init__(self, space, left, right, sandwiches):
        self.space = space
        d = space.dim
        self.left = sp.csr_matrix(left, shape=(d, d), dtype=complex)
        self.right = sp.csr_matrix(right, shape=(d, d), dtype=complex)
        self.sandwiches = [(complex(c), sp.csr_matrix(a), sp.csr_matrix(b)) for c, a, b in sandwiches]

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        d = self.space.dim
        eye = sp.identity(d, dtype=complex, format="csr")
        m = sp.kron(eye, self.left) + sp.kron(self.right.T, eye)
        for c, a, b in self.sandwiches:
            m = m + c * sp.kron(b.T, a)
        m = sp.csr_matrix(m)
        m.sum_duplicates()
        m.eliminate_zeros()
        return m

    @property
    def shape(self):
        return (self.space.dim**2,) * 2

    @cached_property
    def scale(self) -> float:
        """Largest absolute matrix entry, the reference for residual checks."""
        m = self.matrix
        return float(np.max(np.abs(m.data))) if m.nnz else 1.0

    def apply(self, rho):
        """Matrix-free ``L[rho]`` for a ``dim**2`` vector or ``dim x dim`` matrix."""
        d = self.space.dim
        arr = np.asarray(rho)
        if arr.shape == (d * d,):
            mat = arr.reshape(d, d, order="F")
        elif arr.shape == (d, d):
            mat = arr
        else:
            raise SpaceMismatchError(f"expected {d * d} entries, got shape {arr.shape}")
        out = self.left @ mat + (self.right.T @ mat.T).T
        for c, a, b in self.sandwiches:
            out = out + c * (b.T @ (a @ mat).T).T
        out = np.asarray(out)
        return out.reshape(-1, order="F") if arr.ndim == 1 else out

    def __matmul__(self, vec):
        return self.matrix @ vec

    # -- excitation-difference sectors ------------------------------------
    @cached_property
    def _exc_difference(self) -> np.ndarray:
        e = self.space.excitations
        # column stacking: p = j*d + i  ->  exc[i] - exc[j]
        return (e[None, :] - e[:, None]).reshape(-1)

    def sector_indices(self, k: int) -> np.ndarray:
        """Vectorized indices of ``|i><j|`` with ``exc(i) - exc(j) == k``."""
        return np.flatnonzero(self._exc_difference == k)

    def block(self, k: int) -> sp.csc_matrix:
        idx = self.sector_indices(k)
        return self.matrix[idx][:, idx].tocsc()

    def conserves_sectors(self) -> bool:
        """True if the generator never couples different excitation sectors."""
        coo = self.matrix.tocoo()
        diff = self._exc_difference
        return bool(np.all(diff[coo.row] == diff[coo.col]))

    def __repr__(self):
        return f"Superoperator(dim={self.space.dim}, nnz={self.matrix.nnz})"


def apply(superop: Superoperator, rho):
    return superop.apply(rho)


def hamiltonian(params: ModelParams, space: HilbertSpace) -> SparseOperator:
    """``Delta a^dag a + sum_{i!=j} Omega_ij s+_i s-_j + g sum_i (a s+_i + a^dag s-_i)``."""
    if space.n_atoms != params.n_atoms:
        raise SpaceMismatchError(
            f"space has {space.n_atoms} atoms, geometry has {params.n_atoms}")
    a = annihilation(space).entries
    ad = creation(space).entries
    h = params.detuning * (ad @ a)
    _, omega = effective_couplings(params)
    sps = [sigma_plus(space, i).entries for i in range(space.n_atoms)]
    sms = [sigma_minus(space, i).entries for i in range(space.n_atoms)]
    for i in range(space.n_atoms):
        h = h + params.g * (a @ sps[i] + ad @ sms[i])
        for j in range(space.n_atoms):
            if i != j and omega[i, j] != 0:
                h = h + omega[i, j] * (sps[i] @ sms[j])
    return SparseOperator(space, h)


def lindblad_superoperator(space, h, channels) -> Superoperator:
    """Generator ``-i[H, rho] + sum rate*(A rho B^dag - {B^dag A, rho}/2)``.

    ``channels`` is an iterable of ``(rate, A, B)``; ``A is B`` gives an
    ordinary dissipator, distinct operators give the cross terms of a
    correlated decay matrix.
    """
    h = sp.csr_matrix(h)
    left = -1j * h
    right = 1j * h
    sandwiches = []
    for rate, a, b in channels:
        if rate == 0:
            continue
        a = sp.csr_matrix(a)
        bd = sp.csr_matrix(b).conj().T
        anti = bd @ a
        left = left - 0.5 * rate * anti
        right = right - 0.5 * rate * anti
        sandwiches.append((rate, a, bd))
    return Superoperator(space, left, right, sandwiches)


def liouvillian(params: ModelParams, space: HilbertSpace) -> Superoperator:
    """Full master-equation generator for the N-atom lattice laser.

    Collective decay enters through all pairs ``(i, j)`` of the decay matrix.
    The individual pump acts on every atom separately; the collective pump is
    a single channel with ``S+ = sum_i s+_i`` at rate ``pump_rate``.
    """
    h = hamiltonian(params, space).entries
    n = space.n_atoms
    gamma, _ = effective_couplings(params)
    sps = [sigma_plus(space, i).entries for i in range(n)]
    sms = [sigma_minus(space, i).entries for i in range(n)]
    channels = []
    for i in range(n):
        for j in range(n):
            if gamma[i, j] != 0:
                channels.append((gamma[i, j], sms[i], sms[j]))
    if params.pump_rate > 0 and n > 0:
        if params.pump_mode is PumpMode.INDIVIDUAL:
            channels.extend((params.pump_rate, s, s) for s in sps)
        else:
            s_plus = sum(sps[1:], sps[0])
            channels.append((params.pump_rate, s_plus, s_plus))
    a = annihilation(space).entries
    channels.append((2.0 * params.kappa, a, a))
    return lindblad_superoperator(space, h, channels)

