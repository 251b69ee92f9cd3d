"""Simulation of a superradiant lattice laser: few two-level atoms in a regular
geometry, coupled to a lossy cavity, with dipole-dipole interactions,
collective spontaneous emission and incoherent pumping."""

__version__ = "0.1.0"

from .geometry import (  # noqa: E402
    CouplingMatrices,
    Geometry,
    build_geometry,
    coupling_matrices,
    custom_geometry,
    f_func,
    g_func,
)
from .operators import HilbertSpace, SparseOperator  # noqa: E402
from .model import DecayMode, ModelParams, PumpMode, Superoperator, hamiltonian, liouvillian  # noqa: E402
from .collective import DickeSpace, collective_liouvillian, collective_observables  # noqa: E402
from .solvers import (  # noqa: E402
    DensityMatrix,
    SolverOptions,
    correlation_adag_a,
    evolve,
    steady_state,
)
from .spectrum import LorentzFit, SpectrumResult, lorentz_fit, spectrum_fft, spectrum_resolvent  # noqa: E402
from .observables import g2_zero, inversion, observables, photon_number  # noqa: E402
