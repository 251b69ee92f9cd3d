import json
import math
import textwrap

import numpy as np
import pytest

from srlaser.cli import main, reduce_grid
from srlaser.config import list_presets, load_config, load_preset, parse_config
from srlaser.errors import ConfigurationError
from srlaser.runner import csv_text, run_sweep, solve_point, validate, write_outputs

BASE = """
[run]
label = "t"

[model]
g = 0.6
gamma0 = 0.2
pump_rate = 1.0

[geometry]
family = "chain"
n_atoms = 2
lattice_const = 0.2

[hilbert]
fock_cutoff = 6
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def test_defaults_and_grammar():
    cfg = parse_config({})
    assert cfg["model"]["g"] == 1.0 and cfg["model"]["kappa"] == 1.0
    assert cfg["geometry"]["dipole_axis"] == [0.0, 0.0, 1.0]
    cfg = parse_config({"sweep": [{"name": "pump_rate", "start": 0, "stop": 1, "num": 3},
                                  {"name": "gamma0", "values": [0.1, 0.2]}]})
    assert [ov for _, ov in cfg.points()][:2] == [{"pump_rate": 0.0, "gamma0": 0.1},
                                                 {"pump_rate": 0.0, "gamma0": 0.2}]
    assert len(cfg.points()) == 6


def test_unknown_field_is_located(tmp_path):
    path = write(tmp_path, BASE + "\n[solver]\nbogus = 1\n")
    with pytest.raises(ConfigurationError, match=r"\[solver\]\.bogus"):
        load_config(path)
    assert main(["validate", "--config", str(path)]) == 1


@pytest.mark.parametrize("doc", [
    {"sweep": [{"name": "pump_rate", "values": [1]}] * 3},
    {"sweep": [{"name": "nonsense", "values": [1]}]},
    {"sweep": [{"name": "pump_rate"}]},
    {"model": {"pump_rate": -1.0}},
    {"geometry": {"family": "square", "n_atoms": 3}},
    {"output": {"requested": ["n", "colour"]}},
    {"banana": {}},
])
def test_invalid_configs(doc):
    with pytest.raises(ConfigurationError):
        parse_config(doc)


def test_sweep_point_domains_checked():
    with pytest.raises(ConfigurationError, match="sweep point"):
        parse_config({"sweep": [{"name": "lattice_const", "values": [0.1, 0.0]}]})


def test_validate_examples():
    cfg = parse_config({"geometry": {"n_atoms": 4, "family": "square", "lattice_const": 0.58},
                        "hilbert": {"fock_cutoff": 8}})
    check = validate(cfg)["checks"][0]
    assert check["dim"] == 144 and check["superoperator_side"] == 20736
    assert check["recommendation"] == "direct solver"
    big = validate(parse_config({"geometry": {"n_atoms": 12}, "hilbert": {"fock_cutoff": 8}}))
    assert big["hard_stop"] and big["checks"][0]["dim"] == 4096 * 9
    assert any("HARD STOP" in w for w in big["warnings"])


def test_geometry_family_axis():
    cfg = parse_config({"sweep": [{"name": "geometry_family",
                                   "values": ["chain3", "triangle", "square"]}]})
    geoms = [cfg.with_overrides(ov).geometry() for _, ov in cfg.points()]
    assert [g.n_atoms for g in geoms] == [3, 3, 4]


def test_single_point_sweep_equals_steady(tmp_path):
    single = load_config(write(tmp_path, BASE))
    swept = load_config(write(tmp_path, BASE + '\n[[sweep]]\nname = "pump_rate"\nvalues = [1.0]\n',
                              "sweep.toml"))
    a = solve_point(single)
    (b,) = run_sweep(swept)
    for key in ("n", "inversion", "g2"):
        assert a.values[key] == b.values[key]
    assert a.params == b.params


def test_determinism_across_workers(tmp_path):
    cfg = load_config(write(tmp_path, BASE + textwrap.dedent("""
        [[sweep]]
        name = "pump_rate"
        values = [0.5, 1.0, 2.0]

        [[sweep]]
        name = "lattice_const"
        values = [0.1, 0.3]
        """)))
    one = csv_text(cfg, run_sweep(cfg, 1), timestamp="T")
    three = csv_text(cfg, run_sweep(cfg, 3), timestamp="T")
    assert one == three
    header, columns, *rows = one.splitlines()
    assert header.startswith("# srlaser") and "g=0.6" in header
    assert columns.split(",")[:5] == ["pump_rate", "lattice_const", "n", "inversion", "g2"]
    assert len(rows) == 6 and all(r.split(",")[-1] == "" for r in rows)


def test_rows_echo_parameters(tmp_path):
    cfg = load_config(write(tmp_path, BASE + '\n[[sweep]]\nname = "gamma0"\nvalues = [0.3]\n'))
    files = write_outputs(cfg, run_sweep(cfg), tmp_path / "out", timestamp="T")
    summary = json.loads(files["json"].read_text())
    params = summary["rows"][0]["params"]
    assert params["gamma0"] == 0.3 and params["pump_rate"] == 1.0 and params["g"] == 0.6
    assert len(params["geometry"]["positions"]) == 2
    assert summary["version"] and summary["config"]["sections"]["model"]["g"] == 0.6


def test_cli_steady_and_spectrum(tmp_path, capsys):
    path = write(tmp_path, BASE)
    assert main(["steady", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "t.csv").read_text().splitlines()
    assert text[1].startswith("n,inversion,g2")
    assert main(["spectrum", "--config", str(path), "--out", str(tmp_path / "s"),
                 "--cross-check"]) == 0
    row = json.loads((tmp_path / "s" / "t.json").read_text())["rows"][0]
    assert row["values"]["linewidth"] > 0
    assert row["values"]["cross_check_max_rel"] < 0.01
    assert row["values"]["cross_check_linewidth_rel"] < 0.02
    assert row["values"]["parseval_error"] < 0.01
    assert (tmp_path / "s" / "t_spectrum_resolvent.csv").exists()


def test_exit_codes(tmp_path):
    mixed = write(tmp_path, BASE + textwrap.dedent("""
        [[sweep]]
        name = "pump_mode"
        values = ["individual", "collective"]

        [[sweep]]
        name = "decay_mode"
        values = ["fully_collective"]
        """))
    # the collective pump with collective decay has no unique steady state
    assert main(["sweep", "--config", str(mixed), "--out", str(tmp_path / "m")]) == 3
    failing = write(tmp_path, BASE.replace("gamma0 = 0.2", 'gamma0 = 0.2\npump_mode = "collective"\n'
                                           'decay_mode = "fully_collective"'), "fail.toml")
    assert main(["steady", "--config", str(failing), "--out", str(tmp_path / "f")]) == 2
    assert main(["steady", "--config", str(tmp_path / "missing.toml")]) == 1
    assert main(["preset", "nonexistent"]) == 1


def test_selftest_command():
    assert main(["selftest", "--seed", "5"]) == 0


def test_preset_listing(capsys):
    assert main(["preset", "--list"]) == 0
    names = capsys.readouterr().out.split()
    assert {"fig2a", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8a", "fig8b"} <= set(names)


@pytest.mark.slow
@pytest.mark.parametrize("name", list_presets())
def test_preset_smoke(name, tmp_path):
    cfg = load_preset(name)
    assert cfg["run"]["notes"], "presets document their assumed g"
    small = reduce_grid(cfg, 1 if cfg.wants_spectrum else 2)
    results = run_sweep(small, 2)
    assert results and not any(r.failed for r in results)
    for r in results:
        assert r.values["n"] >= -1e-10
        if "linewidth" in r.values:
            assert r.values["linewidth"] > 0
            assert r.values["parseval_error"] < 0.01
    files = write_outputs(small, results, tmp_path, timestamp="T")
    assert files["csv"].exists()
