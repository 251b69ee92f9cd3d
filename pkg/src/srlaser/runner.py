"""Single-point solves, parameter sweeps and static validation."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .collective import DickeSpace, collective_liouvillian, collective_observables
from .config import RunConfig
from .errors import SrLaserError, TruncationWarning
from .model import liouvillian
from .observables import observables
from .operators import HilbertSpace
from .solvers import DIRECT_LIMIT, SolverOptions, correlation_adag_a, steady_state
from .spectrum import lorentz_fit, spectrum_fft, spectrum_resolvent

__all__ = ["PointResult", "solve_point", "run_sweep", "run_spectrum", "validate",
           "write_outputs", "seed_cavity", "compare_spectra", "CSV_FLAGS"]

log = logging.getLogger(__name__)

EMPTY_CAVITY = 1e-12
HARD_STOP_SUPERDIM = 4_000_000
OBS_COLUMNS = ("n", "inversion", "g2")
FIT_COLUMNS = ("linewidth", "shift", "delta_a_over_gamma", "shift_vs_cavity", "fit_residual",
               "parseval_error", "cross_check_max_rel", "cross_check_linewidth_rel")
CSV_FLAGS = ("fock_cutoff_used", "truncation_warning", "fit_unreliable", "multi_peak",
             "antibunched", "seeded", "window_truncated", "error")


@dataclass
class PointResult:
    index: tuple
    axes: dict
    params: dict
    values: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    spectrum: object = None
    fit: object = None
    resolvent: object = None

    @property
    def failed(self) -> bool:
        return bool(self.flags.get("error"))

    def to_row(self) -> dict:
        return {"index": list(self.index), "axes": self.axes, "params": self.params,
                "values": self.values, "flags": self.flags,
                "fit": self.fit.to_dict() if self.fit is not None else None}


def solver_options(cfg: RunConfig) -> SolverOptions:
    s = cfg["solver"]
    return SolverOptions(method=s["method"], residual_tol=float(s["residual_tol"]),
                         check_uniqueness=bool(s["check_uniqueness"]),
                         tau_step=float(s["tau_step"]), tau_initial=float(s["tau_initial"]),
                         tau_max=float(s["tau_max"]), decay_tol=float(s["decay_tol"]),
                         seed=int(cfg["run"]["seed"]))


def build_system(cfg: RunConfig, fock_cutoff: int):
    params = cfg.model_params()
    if cfg["hilbert"]["model"] == "collective":
        space = DickeSpace(int(cfg["geometry"]["n_atoms"]), fock_cutoff)
        return params, space, collective_liouvillian(params, space)
    space = HilbertSpace(params.n_atoms, fock_cutoff)
    return params, space, liouvillian(params, space)


def _steady_with_cutoff(cfg: RunConfig, opts: SolverOptions):
    """Steady state, raising the Fock cutoff by 2 while the top level is populated."""
    n_max = int(cfg["hilbert"]["fock_cutoff"])
    limit = int(cfg["hilbert"]["max_fock_cutoff"])
    while True:
        params, space, L = build_system(cfg, n_max)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            rho = steady_state(L, opts)
        if not rho.diagnostics["truncation_warning"] or not cfg["hilbert"]["auto_extend"] \
                or n_max + 2 > limit:
            if rho.diagnostics["truncation_warning"]:
                log.warning("Fock truncation inadequate at n_max=%d (top population %.2e)",
                            n_max, rho.diagnostics["top_fock_population"])
            return params, space, L, rho
        n_max += 2


def seed_cavity(rho: np.ndarray, space, nbar: float) -> np.ndarray:
    """Replace the cavity state by a truncated thermal state of mean ``nbar``."""
    nf = space.n_fock
    na = space.dim // nf
    r = np.asarray(rho).reshape(na, nf, na, nf)
    atoms = np.einsum("ikjk->ij", r)
    p = (nbar / (1 + nbar)) ** np.arange(nf)
    p /= p.sum()
    return np.kron(atoms, np.diag(p)).astype(complex)


def compare_spectra(fft_spec, res_spec, threshold: float = 0.01) -> float:
    """Max relative difference where the resolvent spectrum exceeds ``threshold*peak``."""
    interp = np.interp(res_spec.omega, fft_spec.omega, fft_spec.values)
    ref = res_spec.values
    sel = ref > threshold * np.nanmax(ref)
    if not np.any(sel):
        return 0.0
    return float(np.max(np.abs(interp[sel] - ref[sel]) / ref[sel]))


def _point_observables(cfg, space, rho):
    if isinstance(space, DickeSpace):
        o = collective_observables(rho, space)
        return o["photon_number"], o["inversion_per_atom"], o["g2_zero"]
    o = observables(rho, space)
    return o.photon_number, o.inversion, o.g2_zero


def solve_point(cfg: RunConfig, index: tuple = (), axes: dict | None = None) -> PointResult:
    """Steady state, observables and (if requested) spectrum for one point.

    Solver failures are caught and reported in ``flags["error"]``.
    """
    axes = axes or {}
    result = PointResult(index=tuple(index), axes=dict(axes), params={})
    flags = result.flags
    for name in CSV_FLAGS:
        flags[name] = "" if name == "error" else False
    try:
        params = cfg.model_params()
        result.params = params.to_dict()
        result.params["model"] = cfg["hilbert"]["model"]
        opts = solver_options(cfg)
        params, space, L, rho = _steady_with_cutoff(cfg, opts)
        flags["fock_cutoff_used"] = space.fock_cutoff
        flags["truncation_warning"] = bool(rho.diagnostics["truncation_warning"])
        n, inv, g2 = _point_observables(cfg, space, rho)
        result.values.update(n=n, inversion=inv, g2=g2)
        flags["antibunched"] = bool(np.isfinite(g2) and g2 < 1.0)
        if cfg.wants_spectrum:
            _spectrum_for_point(cfg, params, space, L, rho, n, opts, result)
    except SrLaserError as exc:
        flags["error"] = f"{type(exc).__name__}: {exc}"
        log.error("point %s failed: %s", axes, exc)
    return result


def _spectrum_for_point(cfg, params, space, L, rho, n, opts, result):
    sec = cfg["spectrum"]
    flags = result.flags
    state = rho.data
    ref_n = n
    if n < EMPTY_CAVITY:
        state = seed_cavity(rho.data, space, float(sec["seed_photons"]))
        ref_n = float(np.sum(np.real(np.diag(state)) * space.photon_numbers))
        flags["seeded"] = True
    corr = correlation_adag_a(L, state, kappa=params.kappa, opts=opts,
                              method=cfg["solver"]["propagator"])
    flags["window_truncated"] = not corr.decayed
    spec = spectrum_fft(corr, pad_factor=int(sec["pad_factor"]), decay_tol=opts.decay_tol,
                        strict=False)
    result.spectrum = spec
    result.values["parseval_error"] = spec.normalization_error(ref_n)
    gamma0 = params.gamma0 if params.gamma0 > 0 else None
    fit = lorentz_fit(spec, gamma0=gamma0, detuning=params.detuning)
    fit_spec = spec
    if sec["method"] == "resolvent" or sec["cross_check"]:
        half = float(sec["resolvent_half_width"]) * fit.linewidth
        grid = np.linspace(fit.center_shift - half, fit.center_shift + half,
                           int(sec["resolvent_points"]))
        res = spectrum_resolvent(L, state, grid)
        result.resolvent = res
        if sec["method"] == "resolvent":
            fit_spec = res
        if sec["cross_check"]:
            other = lorentz_fit(res, gamma0=gamma0, detuning=params.detuning)
            result.values["cross_check_max_rel"] = compare_spectra(spec, res)
            result.values["cross_check_linewidth_rel"] = abs(other.linewidth - fit.linewidth) \
                / fit.linewidth
    if fit_spec is not spec:
        fit = lorentz_fit(fit_spec, gamma0=gamma0, detuning=params.detuning)
    result.fit = fit
    result.values.update(linewidth=fit.linewidth, shift=fit.center_shift,
                         delta_a_over_gamma=fit.atom_laser_detuning,
                         shift_vs_cavity=fit.shift_vs_cavity, fit_residual=fit.fit_residual)
    flags["fit_unreliable"] = fit.unreliable
    flags["multi_peak"] = fit.multi_peak


def _solve_indexed(args):
    cfg, index, overrides = args
    return solve_point(cfg.with_overrides(overrides), index, overrides)


def run_sweep(cfg: RunConfig, workers: int | None = None) -> list[PointResult]:
    """Solve every sweep point; results come back in axis order for any worker count."""
    workers = int(workers or cfg["run"]["workers"])
    tasks = [(cfg, idx, ov) for idx, ov in cfg.points()]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_indexed, tasks))
    else:
        results = [_solve_indexed(t) for t in tasks]
    return sorted(results, key=lambda r: r.index)


def run_spectrum(cfg: RunConfig) -> PointResult:
    """Single-point run that always computes the spectrum and its fit."""
    sec = dict(cfg.sections)
    out = dict(sec["output"])
    out["requested"] = sorted(set(out["requested"]) | {"spectrum", "linewidth", "shift"})
    sec["output"] = out
    point = RunConfig(sec, [], cfg.source)
    return solve_point(point)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def csv_text(cfg: RunConfig, results: list[PointResult], timestamp: str | None = None) -> str:
    """CSV with one comment header line, then a fixed column order."""
    buf = io.StringIO()
    stamp = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
    m = cfg["model"]
    buf.write(f"# srlaser {__version__} {cfg['run']['label'] or 'run'} {stamp} "
              f"g={m['g']!r} kappa={m['kappa']!r}\n")
    axes = [name for name, _ in cfg.sweeps]
    obs = [c for c in OBS_COLUMNS if c in cfg.requested]
    fit = list(FIT_COLUMNS) if cfg.wants_spectrum else []
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(axes + obs + fit + list(CSV_FLAGS))
    for r in results:
        row = [_fmt(r.axes.get(a)) for a in axes]
        row += [_fmt(r.values.get(c)) for c in obs + fit]
        row += [_fmt(r.flags.get(f)) for f in CSV_FLAGS]
        writer.writerow(row)
    return buf.getvalue()


def write_outputs(cfg: RunConfig, results: list[PointResult], out_dir=None,
                  timestamp: str | None = None) -> dict:
    out = Path(out_dir or cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    label = cfg["run"]["label"] or "run"
    csv_path = out / f"{label}.csv"
    csv_path.write_text(csv_text(cfg, results, timestamp))
    spectra = []
    if cfg["output"]["write_spectra"] or "spectrum" in cfg.requested:
        for r in results:
            if r.spectrum is None:
                continue
            name = "_".join(str(i) for i in r.index) or "point"
            path = out / f"{label}_spectrum_{name}.csv"
            r.spectrum.write_csv(path)
            spectra.append(path.name)
    summary = {
        "version": __version__,
        "config": cfg.to_dict(),
        "rows": [r.to_row() for r in results],
        "spectra": spectra,
        "n_failed": sum(r.failed for r in results),
    }
    json_path = out / f"{label}.json"
    json_path.write_text(json.dumps(summary, indent=1, default=_json_default))
    return {"csv": csv_path, "json": json_path, "spectra": spectra}


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and math.isnan(o):
        return None
    raise TypeError(type(o))


def validate(cfg: RunConfig) -> dict:
    """Static size estimate for every distinct sweep point; never solves."""
    report = {"points": len(cfg.points()), "checks": [], "warnings": [], "hard_stop": False}
    seen = set()
    for _, ov in cfg.points():
        point = cfg.with_overrides(ov)
        n = int(point["geometry"]["n_atoms"]) if point["geometry"]["positions"] is None \
            else len(point["geometry"]["positions"])
        n_max = int(point["hilbert"]["fock_cutoff"])
        model = point["hilbert"]["model"]
        key = (n, n_max, model)
        if key in seen:
            continue
        seen.add(key)
        dim = (n + 1) * (n_max + 1) if model == "collective" else 2**n * (n_max + 1)
        superdim = dim * dim
        if superdim <= DIRECT_LIMIT:
            rec = "direct solver"
        elif superdim <= HARD_STOP_SUPERDIM:
            rec = "krylov solver"
        else:
            rec = "infeasible"
        # rough nnz of the superoperator, complex128 plus int32 indices
        mem = superdim * (4 + 2 * n) * 20
        entry = {"n_atoms": n, "fock_cutoff": n_max, "model": model, "dim": dim,
                 "superoperator_side": superdim, "estimated_bytes": mem,
                 "recommendation": rec}
        report["checks"].append(entry)
        if rec == "krylov solver":
            report["warnings"].append(f"N={n}, n_max={n_max}: superoperator side {superdim} "
                                      "exceeds the direct-solver range")
        if rec == "infeasible":
            report["hard_stop"] = True
            report["warnings"].append(f"HARD STOP: N={n}, n_max={n_max} gives dim {dim}; "
                                      "direct solution infeasible")
    return report
