"""Scalar diagnostics of a state of the atoms-plus-cavity system."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .operators import sigma_z

__all__ = ["ObservableSet", "photon_number", "inversion", "per_atom_inversion",
           "g2_zero", "observables", "G2_UNDEFINED_BELOW"]

#: g2(0) is reported as undefined below this photon number.
G2_UNDEFINED_BELOW = 1e-9


def _data(rho):
    return np.asarray(getattr(rho, "data", rho))


def photon_number(rho, space) -> float:
    return float(np.real(np.sum(np.real(np.diag(_data(rho))) * space.photon_numbers)))


def per_atom_inversion(rho, space) -> list[float]:
    d = _data(rho)
    return [float(np.real(sigma_z(space, i).expect(d))) for i in range(space.n_atoms)]


def inversion(rho, space) -> float:
    """Atom-averaged ``<sigma_z>``; +1 is full inversion."""
    vals = per_atom_inversion(rho, space)
    return float(np.mean(vals)) if vals else float("nan")


def g2_zero(rho, space) -> float:
    """``<a^dag a^dag a a> / <a^dag a>^2``; NaN if the cavity is empty."""
    d = _data(rho)
    n = photon_number(d, space)
    if n < G2_UNDEFINED_BELOW:
        return float("nan")
    pn = np.real(np.diag(d))
    nn = space.photon_numbers
    return float(np.sum(pn * nn * (nn - 1)) / n**2)


@dataclass
class ObservableSet:
    photon_number: float
    inversion: float
    g2_zero: float
    per_atom_inversion: list
    g2_undefined: bool
    antibunched: bool

    def to_dict(self) -> dict:
        return asdict(self)


def observables(rho, space) -> ObservableSet:
    n = photon_number(rho, space)
    g2 = g2_zero(rho, space)
    per_atom = per_atom_inversion(rho, space)
    return ObservableSet(
        photon_number=n,
        inversion=float(np.mean(per_atom)) if per_atom else float("nan"),
        g2_zero=g2,
        per_atom_inversion=per_atom,
        g2_undefined=bool(np.isnan(g2)),
        antibunched=bool(np.isfinite(g2) and g2 < 1.0),
    )

