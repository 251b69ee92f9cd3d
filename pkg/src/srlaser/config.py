"""Run configuration: TOML parsing, validation and sweep-point expansion.

Grammar (all rates in units of kappa, distances in units of the wavelength)::

    [run]       label, notes, workers, seed
    [model]     g, kappa, gamma0, pump_rate, detuning, decay_mode, pump_mode
    [geometry]  family, n_atoms, lattice_const, dipole_axis, positions
    [hilbert]   model ("full" | "collective"), fock_cutoff, auto_extend, max_fock_cutoff
    [solver]    method, residual_tol, check_uniqueness, tau_step, tau_initial,
                tau_max, decay_tol, propagator
    [spectrum]  method ("fft" | "resolvent"), cross_check, pad_factor,
                seed_photons, resolvent_points, resolvent_half_width
    [output]    requested, dir, write_spectra
    [[sweep]]   name, and either values = [...] or start, stop, num

At most two ``[[sweep]]`` tables are allowed.  Unknown keys are errors.
"""

from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigurationError
from .geometry import Family, build_geometry, custom_geometry
from .model import DecayMode, ModelParams, PumpMode

__all__ = ["RunConfig", "load_config", "parse_config", "SWEEP_AXES", "OUTPUTS",
           "PRESET_DIR", "list_presets", "load_preset"]

PRESET_DIR = Path(__file__).with_name("presets")

SWEEP_AXES = ("pump_rate", "gamma0", "detuning", "lattice_const", "n_atoms",
              "geometry_family", "decay_mode", "pump_mode")
OUTPUTS = ("n", "inversion", "g2", "spectrum", "linewidth", "shift")

_SCHEMA: dict[str, dict[str, Any]] = {
    "run": {"label": "", "notes": "", "workers": 1, "seed": 0},
    "model": {"g": 1.0, "kappa": 1.0, "gamma0": 0.0, "pump_rate": 0.0, "detuning": 0.0,
              "decay_mode": "full_geometry", "pump_mode": "individual"},
    "geometry": {"family": "chain", "n_atoms": 1, "lattice_const": 1.0,
                 "dipole_axis": [0.0, 0.0, 1.0], "positions": None},
    "hilbert": {"model": "full", "fock_cutoff": 6, "auto_extend": True, "max_fock_cutoff": 24},
    "solver": {"method": None, "residual_tol": 1e-10, "check_uniqueness": True,
               "tau_step": 0.05, "tau_initial": 200.0, "tau_max": 1600.0, "decay_tol": 1e-4,
               "propagator": "expm"},
    "spectrum": {"method": "fft", "cross_check": False, "pad_factor": 4, "seed_photons": 0.1,
                 "resolvent_points": 401, "resolvent_half_width": 10.0},
    "output": {"requested": ["n", "inversion", "g2"], "dir": "out", "write_spectra": False},
}
_SWEEP_KEYS = {"name", "values", "start", "stop", "num"}


@dataclass
class RunConfig:
    sections: dict[str, dict[str, Any]]
    sweeps: list[tuple[str, list]] = field(default_factory=list)
    source: str = "<memory>"

    def __getitem__(self, key):
        return self.sections[key]

    @property
    def requested(self) -> list[str]:
        return list(self.sections["output"]["requested"])

    @property
    def wants_spectrum(self) -> bool:
        return bool({"spectrum", "linewidth", "shift"} & set(self.requested))

    def points(self) -> list[tuple[tuple[int, ...], dict]]:
        """Sweep points in deterministic axis order: ``(index tuple, overrides)``."""
        if not self.sweeps:
            return [((), {})]
        grids = [range(len(v)) for _, v in self.sweeps]
        out = []
        for idx in itertools.product(*grids):
            out.append((idx, {name: vals[i] for (name, vals), i in zip(self.sweeps, idx)}))
        return out

    def with_overrides(self, overrides: dict) -> "RunConfig":
        """Copy with sweep-axis values applied and the sweeps removed."""
        sec = copy.deepcopy(self.sections)
        for name, value in overrides.items():
            if name == "geometry_family":
                fam, n = _parse_family(value)
                sec["geometry"]["family"] = fam
                if n is not None:
                    sec["geometry"]["n_atoms"] = n
            elif name in ("lattice_const", "n_atoms"):
                sec["geometry"][name] = value
            else:
                sec["model"][name] = value
        return RunConfig(sec, [], self.source)

    def model_params(self) -> ModelParams:
        m = self.sections["model"]
        return ModelParams(g=float(m["g"]), kappa=float(m["kappa"]), gamma0=float(m["gamma0"]),
                           pump_rate=float(m["pump_rate"]), detuning=float(m["detuning"]),
                           decay_mode=m["decay_mode"], pump_mode=m["pump_mode"],
                           geometry=self.geometry())

    def geometry(self):
        gsec = self.sections["geometry"]
        if gsec.get("positions") is not None:
            return custom_geometry(gsec["positions"], gsec["dipole_axis"])
        if self.sections["hilbert"]["model"] == "collective":
            # reduced model ignores positions; keep a placeholder chain
            return build_geometry("chain", int(gsec["n_atoms"]), float(gsec["lattice_const"]),
                                  gsec["dipole_axis"])
        return build_geometry(gsec["family"], int(gsec["n_atoms"]),
                              float(gsec["lattice_const"]), gsec["dipole_axis"])

    def to_dict(self) -> dict:
        return {"sections": self.sections,
                "sweeps": [{"name": n, "values": v} for n, v in self.sweeps]}


def _parse_family(value: str) -> tuple[str, int | None]:
    value = str(value)
    for fam in ("chain", "triangle", "square"):
        if value.startswith(fam):
            rest = value[len(fam):]
            if rest == "":
                return fam, {"triangle": 3, "square": 4}.get(fam)
            if rest.isdigit():
                return fam, int(rest)
    raise ConfigurationError(f"geometry_family: unknown family {value!r}")


def _err(where: str, msg: str) -> ConfigurationError:
    return ConfigurationError(f"{where}: {msg}")


def parse_config(data: dict, source: str = "<memory>") -> RunConfig:
    """Validate a parsed TOML document and fill defaults."""
    sections = copy.deepcopy({k: dict(v) for k, v in _SCHEMA.items()})
    for key, value in data.items():
        if key == "sweep":
            continue
        if key not in _SCHEMA:
            raise _err(f"{source} [{key}]", "unknown section")
        if not isinstance(value, dict):
            raise _err(f"{source} [{key}]", "expected a table")
        for k, v in value.items():
            if k not in _SCHEMA[key]:
                raise _err(f"{source} [{key}].{k}", "unknown field")
            sections[key][k] = v

    raw_sweeps = data.get("sweep", [])
    if isinstance(raw_sweeps, dict):
        raw_sweeps = [raw_sweeps]
    if len(raw_sweeps) > 2:
        raise _err(f"{source} [[sweep]]", "at most two sweep axes are allowed")
    sweeps = []
    for n, sw in enumerate(raw_sweeps):
        where = f"{source} [[sweep]] #{n + 1}"
        unknown = set(sw) - _SWEEP_KEYS
        if unknown:
            raise _err(where, f"unknown field(s) {sorted(unknown)}")
        name = sw.get("name")
        if name not in SWEEP_AXES:
            raise _err(where, f"name must be one of {SWEEP_AXES}, got {name!r}")
        if "values" in sw:
            values = list(sw["values"])
        elif {"start", "stop", "num"} <= set(sw):
            values = [float(x) for x in np.linspace(sw["start"], sw["stop"], int(sw["num"]))]
        else:
            raise _err(where, "give either values or start/stop/num")
        if not values:
            raise _err(where, "empty value list")
        if name in [s[0] for s in sweeps]:
            raise _err(where, f"duplicate axis {name}")
        sweeps.append((name, values))

    cfg = RunConfig(sections, sweeps, source)
    _validate_domains(cfg)
    return cfg


def _validate_domains(cfg: RunConfig) -> None:
    s = cfg.sections
    src = cfg.source
    for name in cfg.requested:
        if name not in OUTPUTS:
            raise _err(f"{src} [output].requested", f"unknown output {name!r}")
    if s["hilbert"]["model"] not in ("full", "collective"):
        raise _err(f"{src} [hilbert].model", "must be 'full' or 'collective'")
    if int(s["hilbert"]["fock_cutoff"]) < 0:
        raise _err(f"{src} [hilbert].fock_cutoff", "must be >= 0")
    if s["spectrum"]["method"] not in ("fft", "resolvent"):
        raise _err(f"{src} [spectrum].method", "must be 'fft' or 'resolvent'")
    if int(s["run"]["workers"]) < 1:
        raise _err(f"{src} [run].workers", "must be >= 1")
    try:
        DecayMode(s["model"]["decay_mode"])
        PumpMode(s["model"]["pump_mode"])
        Family(s["geometry"]["family"])
    except ValueError as exc:
        raise _err(src, str(exc)) from None
    # every sweep point must produce valid parameters
    for _, overrides in cfg.points():
        point = cfg.with_overrides(overrides)
        try:
            point.model_params()
        except (ConfigurationError, ValueError) as exc:
            raise _err(f"{src} sweep point {overrides}", str(exc)) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read ({exc.strerror})") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return parse_config(data, str(path))


def list_presets() -> list[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.toml"))


def load_preset(name: str) -> RunConfig:
    path = PRESET_DIR / f"{name}.toml"
    if not path.exists():
        raise ConfigurationError(f"unknown preset {name!r}; available: {list_presets()}")
    return load_config(path)
