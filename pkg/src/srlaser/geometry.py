"""Atomic configurations and the pairwise dipole couplings between them.

Positions are in units of the transition wavelength, so the dimensionless
separation entering the coupling functions is ``xi = 2*pi*distance``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, SingularGeometryError

__all__ = [
    "Family",
    "Geometry",
    "CouplingMatrices",
    "build_geometry",
    "custom_geometry",
    "f_func",
    "g_func",
    "coupling_matrices",
    "MAGIC_LATTICE_CONSTANT",
]

#: Half the Sr magic wavelength in units of the clock wavelength.
MAGIC_LATTICE_CONSTANT = 0.58

_DEFAULT_AXIS = (0.0, 0.0, 1.0)


class Family(str, Enum):
    CHAIN = "chain"
    TRIANGLE = "triangle"
    SQUARE = "square"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Geometry:
    """Atom positions (units of the wavelength) and common dipole orientation."""

    positions: np.ndarray
    dipole_axis: np.ndarray = field(default_factory=lambda: np.array(_DEFAULT_AXIS))
    family: Family = Family.CUSTOM
    lattice_const: float | None = None

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.size == 0:
            pos = np.zeros((0, 3))
        if pos.shape[1] != 3:
            raise ConfigurationError(f"positions must be 3-vectors, got shape {pos.shape}")
        axis = np.asarray(self.dipole_axis, dtype=float)
        norm = np.linalg.norm(axis)
        if axis.shape != (3,) or not norm > 0:
            raise DomainError("dipole_axis must be a non-zero 3-vector")
        pos.setflags(write=False)
        axis = axis / norm
        axis.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "dipole_axis", axis)
        object.__setattr__(self, "family", Family(self.family))
        d = self.distances()
        off = ~np.eye(len(pos), dtype=bool)
        if np.any(d[off] <= 0.0):
            raise SingularGeometryError("coincident atoms in geometry")

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]

    def distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.linalg.norm(diff, axis=-1)

    def cos_theta(self) -> np.ndarray:
        """Cosine of the angle between the dipole axis and each separation vector.

        The diagonal is set to zero; it never enters a coupling.
        """
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        d = np.linalg.norm(diff, axis=-1)
        np.fill_diagonal(d, 1.0)
        c = diff @ self.dipole_axis / d
        np.fill_diagonal(c, 0.0)
        return c

    def translated(self, shift: Sequence[float]) -> "Geometry":
        return Geometry(self.positions + np.asarray(shift, float), self.dipole_axis,
                        self.family, self.lattice_const)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "n_atoms": self.n_atoms,
            "lattice_const": self.lattice_const,
            "dipole_axis": self.dipole_axis.tolist(),
            "positions": self.positions.tolist(),
        }


def build_geometry(family, n_atoms: int, lattice_const: float,
                   dipole_axis: Sequence[float] = _DEFAULT_AXIS) -> Geometry:
    """Regular configuration centred at the origin in the xy-plane.

    ``chain`` places ``n_atoms`` equally spaced atoms along x, ``triangle`` is
    equilateral and ``square`` axis aligned, both with side ``lattice_const``.
    The default dipole axis is normal to the lattice plane.
    """
    family = Family(family)
    if n_atoms < 0:
        raise ConfigurationError("n_atoms must be non-negative")
    if not lattice_const > 0:
        raise DomainError(f"lattice_const must be > 0, got {lattice_const}")
    a = float(lattice_const)
    if family is Family.CHAIN:
        x = (np.arange(n_atoms) - (n_atoms - 1) / 2.0) * a
        pos = np.column_stack([x, np.zeros(n_atoms), np.zeros(n_atoms)])
    elif family is Family.TRIANGLE:
        if n_atoms != 3:
            raise ConfigurationError("triangle geometry requires n_atoms=3")
        h = a * np.sqrt(3.0) / 2.0
        pos = np.array([[-a / 2, -h / 3, 0.0], [a / 2, -h / 3, 0.0], [0.0, 2 * h / 3, 0.0]])
    elif family is Family.SQUARE:
        if n_atoms != 4:
            raise ConfigurationError("square geometry requires n_atoms=4")
        s = a / 2.0
        pos = np.array([[-s, -s, 0.0], [s, -s, 0.0], [s, s, 0.0], [-s, s, 0.0]])
    else:
        raise ConfigurationError("custom geometry needs explicit positions; use custom_geometry")
    return Geometry(pos, np.asarray(dipole_axis, float), family, a)


def custom_geometry(positions, dipole_axis: Sequence[float] = _DEFAULT_AXIS) -> Geometry:
    return Geometry(np.asarray(positions, float), np.asarray(dipole_axis, float), Family.CUSTOM)


def _check_xi(xi):
    xi = np.asarray(xi, dtype=float)
    if np.any(~(xi > 0)):
        raise DomainError("coupling functions need xi > 0; the diagonal is handled separately")
    return xi


# below this xi the closed forms of sin(x)/x and cos(x)/x**2 - sin(x)/x**3
# lose digits to cancellation; use their Taylor series instead
_SERIES_XI = 0.5
_K = np.arange(13)
_FACT = np.array([math.factorial(2 * k + 1) for k in _K], dtype=float)
_SINC_COEF = (-1.0) ** _K / _FACT
_B_COEF = ((-1.0) ** _K * 2 * _K / _FACT)[1:]


def _sinc_and_b(xi):
    """``sin(xi)/xi`` and ``cos(xi)/xi**2 - sin(xi)/xi**3``."""
    small = xi < _SERIES_XI
    x = np.where(small, 1.0, xi)
    sinc = np.sin(x) / x
    b = np.cos(x) / x**2 - np.sin(x) / x**3
    x2 = np.where(small, xi, 0.0) ** 2
    sinc = np.where(small, np.polynomial.polynomial.polyval(x2, _SINC_COEF), sinc)
    b = np.where(small, np.polynomial.polynomial.polyval(x2, _B_COEF), b)
    return sinc, b


def f_func(xi, cos_theta):
    """Dissipative coupling function ``F(xi)`` for dipoles at angle theta.

    ``F -> 2/3`` as ``xi -> 0`` for every orientation.
    """
    xi = _check_xi(xi)
    c2 = np.asarray(cos_theta, dtype=float) ** 2
    sinc, b = _sinc_and_b(xi)
    return (1 - c2) * sinc + (1 - 3 * c2) * b


def g_func(xi, cos_theta):
    """Coherent (dipole-dipole shift) coupling function ``G(xi)``."""
    xi = _check_xi(xi)
    c2 = np.asarray(cos_theta, dtype=float) ** 2
    s, c = np.sin(xi), np.cos(xi)
    return -(1 - c2) * c / xi + (1 - 3 * c2) * (s / xi**2 + c / xi**3)


@dataclass(frozen=True)
class CouplingMatrices:
    gamma: np.ndarray
    omega: np.ndarray
    single_atom_gamma: float

    @property
    def n_atoms(self) -> int:
        return self.gamma.shape[0]


def coupling_matrices(geom: Geometry, gamma0: float) -> CouplingMatrices:
    """Collective decay rates and dipole-dipole shifts for every atom pair.

    ``gamma[i, j] = 1.5*gamma0*F(2*pi*r_ij)`` with the exact diagonal
    ``gamma0``; ``omega[i, j] = 0.75*gamma0*G(2*pi*r_ij)`` with zero diagonal.
    """
    if not gamma0 > 0:
        raise DomainError(f"gamma0 must be > 0, got {gamma0}")
    n = geom.n_atoms
    gamma = np.zeros((n, n))
    omega = np.zeros((n, n))
    if n > 1:
        iu = np.triu_indices(n, k=1)
        xi = 2 * np.pi * geom.distances()[iu]
        ct = geom.cos_theta()[iu]
        gamma[iu] = 1.5 * gamma0 * f_func(xi, ct)
        omega[iu] = 0.75 * gamma0 * g_func(xi, ct)
        gamma = gamma + gamma.T
        omega = omega + omega.T
    np.fill_diagonal(gamma, gamma0)
    return CouplingMatrices(gamma, omega, float(gamma0))
