"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 partial failure (some sweep points failed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

import numpy as np

from . import __version__
from .config import RunConfig, list_presets, load_config, load_preset
from .errors import ConfigurationError, SrLaserError
from .runner import run_spectrum, run_sweep, solve_point, validate, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_PARTIAL = 0, 1, 2, 3

log = logging.getLogger("srlaser")


def reduce_grid(cfg: RunConfig, max_points: int = 2) -> RunConfig:
    """Keep the first and last value of every sweep axis (smoke-test resolution)."""
    sweeps = []
    for name, values in cfg.sweeps:
        if len(values) > max_points:
            pick = np.unique(np.linspace(0, len(values) - 1, max_points).round().astype(int))
            values = [values[i] for i in pick]
        sweeps.append((name, values))
    return RunConfig(cfg.sections, sweeps, cfg.source)


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "cross_check", False):
        cfg.sections["spectrum"]["cross_check"] = True
    if getattr(args, "seed", None) is not None:
        cfg.sections["run"]["seed"] = args.seed
    if getattr(args, "workers", None):
        cfg.sections["run"]["workers"] = args.workers
    return cfg


def _exit_for(results) -> int:
    failed = sum(r.failed for r in results)
    if failed == 0:
        return EXIT_OK
    return EXIT_SOLVER if failed == len(results) else EXIT_PARTIAL


def _report_row(r) -> str:
    parts = [f"{k}={v}" for k, v in r.axes.items()]
    for k in ("n", "inversion", "g2", "linewidth", "shift"):
        if k in r.values and r.values[k] is not None:
            parts.append(f"{k}={r.values[k]:.6g}")
    if r.failed:
        parts.append(f"ERROR {r.flags['error']}")
    return "  ".join(parts)


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    report = validate(cfg)
    print(json.dumps(report, indent=1))
    return EXIT_OK


def cmd_steady(args) -> int:
    cfg = _apply_flags(load_config(args.config), args)
    if cfg.sweeps:
        raise ConfigurationError(f"{cfg.source}: steady runs one point; use 'sweep' for [[sweep]]")
    result = solve_point(cfg)
    files = write_outputs(cfg, [result], args.out)
    print(_report_row(result))
    print(f"wrote {files['csv']} and {files['json']}")
    return _exit_for([result])


def cmd_spectrum(args) -> int:
    cfg = _apply_flags(load_config(args.config), args)
    if cfg.sweeps:
        raise ConfigurationError(f"{cfg.source}: spectrum runs one point; use 'sweep'")
    result = run_spectrum(cfg)
    cfg.sections["output"]["requested"] = sorted(
        set(cfg.requested) | {"spectrum", "linewidth", "shift"})
    files = write_outputs(cfg, [result], args.out)
    print(_report_row(result))
    if result.resolvent is not None:
        label = cfg["run"]["label"] or "run"
        path = files["csv"].with_name(f"{label}_spectrum_resolvent.csv")
        result.resolvent.write_csv(path)
    print(f"wrote {files['csv']} and {files['json']}")
    return _exit_for([result])


def _run_and_write(cfg: RunConfig, args) -> int:
    t0 = time.perf_counter()
    results = run_sweep(cfg, args.workers)
    files = write_outputs(cfg, results, args.out)
    for r in results:
        print(_report_row(r))
    print(f"{len(results)} points in {time.perf_counter() - t0:.1f} s; wrote {files['csv']}")
    return _exit_for(results)


def cmd_sweep(args) -> int:
    cfg = _apply_flags(load_config(args.config), args)
    return _run_and_write(cfg, args)


def cmd_preset(args) -> int:
    if args.list or not args.name:
        print("\n".join(list_presets()))
        return EXIT_OK
    cfg = _apply_flags(load_preset(args.name), args)
    if args.reduced:
        cfg = reduce_grid(cfg)
    if cfg["run"]["notes"]:
        print(f"# {cfg['run']['notes']}")
    return _run_and_write(cfg, args)


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    ok = run_selftest(seed=args.seed if args.seed is not None else 0)
    return EXIT_OK if ok else EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="srlaser", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"srlaser {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="TOML run configuration")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--cross-check", action="store_true",
                        help="compare FFT and resolvent spectra")
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("validate", help="static size and memory estimate")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=cmd_validate)
    for name, func, text in (("steady", cmd_steady, "single steady-state point"),
                             ("spectrum", cmd_spectrum, "single-point spectrum and fit"),
                             ("sweep", cmd_sweep, "parameter sweep")):
        sp = sub.add_parser(name, help=text)
        common(sp)
        sp.set_defaults(func=func)
    sp = sub.add_parser("preset", help="run a stored figure preset")
    sp.add_argument("name", nargs="?")
    sp.add_argument("--list", action="store_true")
    sp.add_argument("--reduced", action="store_true", help="first/last value of each axis only")
    common(sp, config=False)
    sp.set_defaults(func=cmd_preset)
    sp = sub.add_parser("selftest", help="randomized property checks")
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SrLaserError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
