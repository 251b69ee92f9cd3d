"""Steady states, time propagation and two-time field correlations.

Every generator built by this package conserves the difference between the
excitation numbers of the ket and the bra.  The steady state lives in the
zero-difference sector and ``a rho`` in the ``-1`` sector, so all solves
below act on the corresponding diagonal block of the Liouvillian only.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import (
    MultiplicityError,
    SolverError,
    SpaceMismatchError,
    StiffnessError,
    TruncationWarning,
)
from .model import Superoperator
from .operators import annihilation, creation

__all__ = [
    "SolverMethod",
    "SolverOptions",
    "DensityMatrix",
    "Correlation",
    "steady_state",
    "evolve",
    "correlation_adag_a",
    "top_fock_population",
    "save_state",
    "load_state",
]

log = logging.getLogger(__name__)

TRUNCATION_THRESHOLD = 1e-6


class SolverMethod(str, Enum):
    DIRECT_SPARSE = "direct_sparse"
    KRYLOV_NULLSPACE = "krylov_nullspace"


# direct LU is used below this superoperator size, Krylov above
DIRECT_LIMIT = 250_000
# sector blocks up to this size are propagated with a dense one-step exponential
DENSE_STEP_LIMIT = 400


@dataclass(frozen=True)
class SolverOptions:
    method: SolverMethod | None = None
    residual_tol: float = 1e-10
    max_iterations: int = 200
    uniqueness_tol: float = 1e-8
    check_uniqueness: bool = True
    rtol: float = 1e-9
    atol: float = 1e-12
    # correlation grid, in units of 1/kappa
    tau_step: float = 0.05
    tau_initial: float = 200.0
    tau_max: float = 1600.0
    decay_tol: float = 1e-4
    seed: int = 1234

    def __post_init__(self):
        if self.method is not None:
            object.__setattr__(self, "method", SolverMethod(self.method))
        for name in ("residual_tol", "uniqueness_tol", "rtol", "atol", "tau_step",
                     "tau_initial", "tau_max", "decay_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


@dataclass
class DensityMatrix:
    space: object
    data: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def vec(self) -> np.ndarray:
        return self.data.reshape(-1, order="F")

    @classmethod
    def from_vec(cls, space, vec, **diag) -> "DensityMatrix":
        d = space.dim
        return cls(space, np.asarray(vec).reshape(d, d, order="F"), dict(diag))

    @classmethod
    def pure(cls, space, ket) -> "DensityMatrix":
        ket = np.asarray(ket, dtype=complex)
        return cls(space, np.outer(ket, ket.conj()))

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def check(self) -> dict:
        """Hermiticity error, trace error and smallest eigenvalue."""
        herm = float(np.max(np.abs(self.data - self.data.conj().T))) if self.data.size else 0.0
        tr = abs(self.trace() - 1.0)
        min_eig = float(np.min(la.eigvalsh(0.5 * (self.data + self.data.conj().T))))
        return {"hermiticity_error": herm, "trace_error": tr, "min_eigenvalue": min_eig,
                "valid": herm <= 1e-10 and tr <= 1e-10 and min_eig >= -1e-8}


def top_fock_population(rho: DensityMatrix) -> float:
    space = rho.space
    diag = np.real(np.diag(rho.data))
    return float(diag[space.photon_numbers == space.fock_cutoff].sum())


def _trace_weights(space, idx: np.ndarray) -> np.ndarray:
    d = space.dim
    return (idx % (d + 1) == 0).astype(complex)


def _bordered(block: sp.csc_matrix, row: int, weights: np.ndarray) -> sp.csc_matrix:
    m = block.tocsr(copy=True).tolil()
    m.rows[row] = list(np.flatnonzero(weights))
    m.data[row] = list(weights[np.flatnonzero(weights)])
    return m.tocsc()


def _solve_direct(block, weights, row):
    n = block.shape[0]
    rhs = np.zeros(n, dtype=complex)
    rhs[row] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            lu = spla.splu(_bordered(block, row, weights))
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            raise MultiplicityError(
                "trace-bordered Liouvillian is singular: the steady state is not unique; "
                "pass an initial state to select one") from exc
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise MultiplicityError("non-finite steady-state solution (degenerate kernel)")
    return x


def _inverse_iteration(block, weights, x0, opts: SolverOptions):
    n = block.shape[0]
    shift = 1e-8 * max(1.0, float(abs(block).max()))
    shifted = (block - shift * sp.identity(n, format="csc")).tocsc()
    try:
        ilu = spla.spilu(shifted, drop_tol=1e-12, fill_factor=30)
        prec = spla.LinearOperator(shifted.shape, ilu.solve, dtype=complex)
    except RuntimeError:
        prec = None
    x = x0 / (weights @ x0)
    for _ in range(opts.max_iterations):
        y, info = spla.gmres(shifted, x, M=prec, rtol=1e-13, atol=0.0, maxiter=200)
        if info < 0:
            raise SolverError(f"GMRES breakdown (info={info})")
        y = y / (weights @ y)
        step = np.max(np.abs(y - x))
        x = y
        if step < 1e-13 and np.max(np.abs(block @ x)) < opts.residual_tol * abs(block).max():
            return x
    raise SolverError("inverse iteration did not converge")


def _kernel_projection(block, weights, x0):
    """Stationary limit of ``exp(block*t) x0`` via left and right null vectors."""
    dense = block.toarray()
    u, s, vh = la.svd(dense)
    tol = max(dense.shape) * np.finfo(float).eps * max(s[0], 1.0) * 100
    k = int(np.sum(s <= tol))
    if k == 0:
        raise SolverError("no kernel found")
    left = u[:, -k:]
    right = vh[-k:].conj().T
    coeffs = la.solve(left.conj().T @ right, left.conj().T @ x0)
    return right @ coeffs, k


def steady_state(L: Superoperator, opts: SolverOptions | None = None,
                 initial: DensityMatrix | None = None) -> DensityMatrix:
    """Trace-one kernel element of ``L``.

    The direct method replaces one population equation by the trace condition
    and factorizes; the Krylov method runs shifted inverse iteration with
    ILU-preconditioned GMRES.  Uniqueness is checked by a second independent
    solve.  With ``initial`` given, the stationary limit reached from that
    state is returned instead, which also handles degenerate kernels.
    """
    opts = opts or SolverOptions()
    space = L.space
    d = space.dim
    idx = L.sector_indices(0) if L.conserves_sectors() else np.arange(d * d)
    block = L.matrix[idx][:, idx].tocsc()
    weights = _trace_weights(space, idx)
    diag_rows = np.flatnonzero(weights)
    method = opts.method
    if method is None:
        # the limit applies to the system actually factorized, i.e. the sector block
        method = (SolverMethod.DIRECT_SPARSE if len(idx) <= DIRECT_LIMIT
                  else SolverMethod.KRYLOV_NULLSPACE)
    rng = np.random.default_rng(opts.seed)
    info: dict = {"method": method.value, "sector_size": int(len(idx))}

    if initial is not None:
        x0 = initial.vec[idx]
        x, kdim = _kernel_projection(block, weights, x0)
        info.update(method="kernel_projection", kernel_dim=kdim)
    elif method is SolverMethod.DIRECT_SPARSE:
        x = _solve_direct(block, weights, diag_rows[0])
        if opts.check_uniqueness and len(diag_rows) > 1:
            x2 = _solve_direct(block, weights, rng.choice(diag_rows[1:]))
            _compare(x, x2, opts)
    else:
        x0 = np.zeros(len(idx), dtype=complex)
        x0[diag_rows] = 1.0
        x = _inverse_iteration(block, weights, x0, opts)
        if opts.check_uniqueness:
            start = np.zeros(len(idx), dtype=complex)
            start[diag_rows] = rng.random(len(diag_rows)) + 0.1
            _compare(x, _inverse_iteration(block, weights, start, opts), opts)

    x = x / (weights @ x)
    vec = np.zeros(d * d, dtype=complex)
    vec[idx] = x
    residual = float(np.max(np.abs(L.matrix @ vec))) if vec.size else 0.0
    info["residual"] = residual
    if residual > opts.residual_tol * L.scale:
        raise SolverError(f"steady-state residual {residual:.3e} exceeds tolerance")
    rho = DensityMatrix.from_vec(space, vec, **info)
    rho.data = 0.5 * (rho.data + rho.data.conj().T)
    rho.data /= np.trace(rho.data).real
    rho.diagnostics.update(rho.check())
    if not rho.diagnostics["valid"]:
        log.warning("steady state violates density-matrix invariants: %s", rho.diagnostics)
    top = top_fock_population(rho)
    rho.diagnostics["top_fock_population"] = top
    # with fock_cutoff=0 the cavity is deliberately frozen in vacuum
    rho.diagnostics["truncation_warning"] = top > TRUNCATION_THRESHOLD and space.fock_cutoff > 0
    if rho.diagnostics["truncation_warning"]:
        warnings.warn(f"top Fock level population {top:.2e} > {TRUNCATION_THRESHOLD:g}; "
                      f"increase fock_cutoff (now {space.fock_cutoff})", TruncationWarning,
                      stacklevel=2)
    return rho


def _compare(x, x2, opts):
    x2 = x2 * ((np.vdot(x2, x) / np.vdot(x2, x2)) if np.vdot(x2, x2) else 1.0)
    scale = max(float(np.max(np.abs(x))), 1e-300)
    if np.max(np.abs(x - x2)) > opts.uniqueness_tol * scale:
        raise MultiplicityError("independent steady-state solves disagree: kernel is degenerate")


def _sector_support(L: Superoperator, vec: np.ndarray):
    if not L.conserves_sectors():
        return [np.arange(vec.size)]
    diff = L._exc_difference
    ks = np.unique(diff[np.abs(vec) > 0])
    return [L.sector_indices(int(k)) for k in ks]


def _propagate(block, y0, t_grid, method: str, opts: SolverOptions):
    t_grid = np.asarray(t_grid, dtype=float)
    if method == "expm":
        steps = np.diff(t_grid)
        uniform = len(steps) and np.allclose(steps, steps[0], rtol=1e-12, atol=0)
        if uniform and block.shape[0] <= DENSE_STEP_LIMIT:
            # one dense step propagator beats per-sample overhead on small blocks
            step = la.expm(block.toarray() * steps[0])
            out = np.empty((len(t_grid), len(y0)), dtype=complex)
            out[0] = y0
            for k in range(1, len(t_grid)):
                out[k] = step @ out[k - 1]
            return out
        if uniform:
            out = spla.expm_multiply(block, y0, start=t_grid[0], stop=t_grid[-1],
                                     num=len(t_grid), endpoint=True)
            return np.atleast_2d(out)
        out = [y0]
        y = y0
        for dt in steps:
            y = spla.expm_multiply(block * dt, y)
            out.append(y)
        return np.array(out)
    ode_method = {"adaptive": "DOP853", "stiff": "BDF"}.get(method)
    if ode_method is None:
        raise ValueError(f"unknown propagation method {method!r}")
    kwargs = {"jac": block} if ode_method == "BDF" else {}
    atol = opts.atol * max(float(np.max(np.abs(y0))), 1e-300)
    sol = solve_ivp(lambda t, y: block @ y, (t_grid[0], t_grid[-1]), y0.astype(complex),
                    method=ode_method, t_eval=t_grid, rtol=opts.rtol, atol=atol, **kwargs)
    if sol.status != 0:
        raise StiffnessError(f"propagation failed ({sol.message}); "
                             "try method='expm' for small dimensions")
    return sol.y.T


def evolve(L: Superoperator, rho0, t_grid, method: str = "adaptive",
           opts: SolverOptions | None = None) -> np.ndarray:
    """Propagate ``rho0`` under ``L`` and return matrices at ``t_grid``.

    ``rho0`` need not be a density matrix; ``a rho_ss`` is a typical input.
    ``method`` is ``"adaptive"`` (8th-order Runge-Kutta, step control at
    ``opts.rtol``), ``"stiff"`` (BDF) or ``"expm"`` (Krylov action of the
    matrix exponential).  Only the excitation sectors occupied by ``rho0``
    are propagated.
    """
    opts = opts or SolverOptions()
    space = L.space
    d = space.dim
    data = rho0.data if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
    if data.shape != (d, d):
        raise SpaceMismatchError(f"expected {d}x{d} matrix, got {data.shape}")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid[0] != 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be ascending and start at 0")
    vec = data.reshape(-1, order="F").astype(complex)
    out = np.zeros((len(t_grid), d * d), dtype=complex)
    for idx in _sector_support(L, vec):
        block = L.matrix[idx][:, idx].tocsr()
        out[:, idx] = _propagate(block, vec[idx], t_grid, method, opts)
    # row p = j*d + i of each time slice holds rho[i, j]
    return out.reshape(len(t_grid), d, d).transpose(0, 2, 1)


@dataclass
class Correlation:
    """Samples of ``<a^dag(tau) a(0)>`` on a uniform grid."""

    tau: np.ndarray
    values: np.ndarray
    decayed: bool
    kappa: float = 1.0

    @property
    def step(self) -> float:
        return float(self.tau[1] - self.tau[0]) if len(self.tau) > 1 else 0.0


def correlation_adag_a(L: Superoperator, rho_ss, tau_grid=None, kappa: float = 1.0,
                       opts: SolverOptions | None = None, method: str = "expm") -> Correlation:
    """Field correlation ``Tr[a^dag exp(L tau)(a rho)]`` by quantum regression.

    Without ``tau_grid`` a uniform grid of step ``opts.tau_step/kappa`` is
    used, starting at ``opts.tau_initial/kappa`` and doubled up to
    ``opts.tau_max/kappa`` until ``|g(tau_end)| < opts.decay_tol * g(0)``.
    """
    opts = opts or SolverOptions()
    space = L.space
    d = space.dim
    data = rho_ss.data if isinstance(rho_ss, DensityMatrix) else np.asarray(rho_ss)
    a = annihilation(space).entries
    ad = creation(space).entries
    x0 = (a @ data).reshape(-1, order="F")
    weights = np.asarray(ad.T.toarray()).reshape(-1, order="F")
    sectors = _sector_support(L, x0)
    if not sectors:
        tau = (np.asarray(tau_grid, float) if tau_grid is not None
               else np.arange(0, opts.tau_initial / kappa + 1e-12, opts.tau_step / kappa))
        return Correlation(tau, np.zeros(len(tau), complex), True, kappa)
    idx = np.concatenate(sectors)
    block = L.matrix[idx][:, idx].tocsr()
    w = weights[idx]
    y0 = x0[idx]

    if tau_grid is not None:
        tau = np.asarray(tau_grid, dtype=float)
        ys = _propagate(block, y0, tau, method, opts)
        vals = ys @ w
        return Correlation(tau, vals, _decayed(vals, opts.decay_tol), kappa)

    dt = opts.tau_step / kappa
    n_steps = int(round(opts.tau_initial / opts.tau_step))
    n_max_steps = int(round(opts.tau_max / opts.tau_step))
    local = np.arange(n_steps + 1) * dt
    ys = _propagate(block, y0, local, method, opts)
    vals = list(ys @ w)
    y_last = ys[-1]
    total = n_steps
    while not _decayed(np.asarray(vals), opts.decay_tol) and total < n_max_steps:
        extra = min(total, n_max_steps - total)
        ys = _propagate(block, y_last, np.arange(extra + 1) * dt, method, opts)
        vals.extend(ys[1:] @ w)
        y_last = ys[-1]
        total += extra
    vals = np.asarray(vals)
    tau = np.arange(total + 1) * dt
    return Correlation(tau, vals, _decayed(vals, opts.decay_tol), kappa)


def _decayed(vals: np.ndarray, tol: float) -> bool:
    g0 = abs(vals[0])
    return g0 == 0 or abs(vals[-1]) < tol * g0


def save_state(rho: DensityMatrix, path) -> None:
    """Binary checkpoint: JSON header line, then row-major complex128 pairs."""
    import json

    header = json.dumps({"space": rho.space.describe(), "dim": rho.space.dim}).encode()
    with open(path, "wb") as fh:
        fh.write(header + b"\n")
        fh.write(np.ascontiguousarray(rho.data, dtype="<c16").tobytes(order="C"))


def load_state(path) -> tuple[dict, np.ndarray]:
    import json

    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        d = header["dim"]
        data = np.frombuffer(fh.read(), dtype="<c16").reshape(d, d)
    return header, data.copy()
