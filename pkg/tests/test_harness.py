"""Config schema, grids, sweep determinism, CLI surface."""

import subprocess
import sys
from dataclasses import replace

import pytest

from permasim.harness import (ConfigError, SimConfig, check_invariants, grid,
                              parse_config_text, sweep, validate)
from permasim.metrics import GridSpec, load_mesh, load_raw
from permasim.telemetry import MODE_LABELS, Layer


def test_defaults_validate_cleanly():
    assert check_invariants(SimConfig()) == []


def test_empty_config_echoes_defaults():
    cfg = validate({})
    assert cfg == SimConfig()


def test_bad_pb0_names_offending_key():
    with pytest.raises(ConfigError) as exc:
        validate({"fault.pb0": "1.5"})
    assert any("fault.pb0" in e for e in exc.value.errors)


def test_all_violations_reported_not_just_first():
    with pytest.raises(ConfigError) as exc:
        validate({"fault.pb0": "1.5", "topology.spots": "0",
                  "quantum.alpha": "0.5"})
    joined = "\n".join(exc.value.errors)
    assert "fault.pb0" in joined and "topology.spots" in joined \
        and "quantum.alpha" in joined


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        validate({"fault.pb00": "0.1"})


def test_classical_mode_ignores_quantum_plane():
    cfg = validate({"mode.social": "classical", "mode.consensus": "none"})
    assert cfg.mode.social is Layer.CLASSICAL
    assert cfg.q_gen_rate > 0  # defaults kept; plane simply stays idle


def test_config_file_text_format():
    text = """
    # comment line
    mode.social = quantum
    fault.pb0 = 0.01   # trailing comment
    topology.spots = 64
    net.nvis.availability = none
    """
    cfg = validate(parse_config_text(text))
    assert cfg.mode.social is Layer.QUANTUM
    assert cfg.pb0 == 0.01
    assert cfg.spots == 64
    assert cfg.nvis_availability is None


def test_malformed_line_reported_with_number():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("a.b = 1\nnot a kv line\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("fault.pb0 = 0.1\nfault.pb0 = 0.2\n")


# -- grids ------------------------------------------------------------------------

def test_usecase_grid_counts_and_order():
    configs = grid("usecase", MODE_LABELS, reps=30, profile="paper")
    assert len(configs) == 270  # 9 modes x 3 pb0 x 10 points
    per_mode = [c for c in configs if c.mode.label == "standard"]
    assert len(per_mode) == 30
    assert per_mode[0].pb0 == 0.1 and per_mode[-1].pb0 == 0.001
    y_first = [(c.spots, c.redundancy) for c in per_mode[:10]]
    assert y_first == [(32, 1), (32, 2), (32, 3), (32, 4), (32, 5),
                       (64, 1), (64, 2), (64, 3), (64, 4), (64, 5)]
    assert all(c.duration_days == 400.0 and c.reps == 30 for c in configs)


def test_extended_grid_counts():
    configs = grid("extended", ["consensus"], profile="desk")
    assert len(configs) == 42  # 3 pb0 x 14 points
    reds = sorted({c.redundancy for c in configs})
    assert reds == [4, 5, 6, 7, 8, 9, 10]
    assert all(c.duration_days == 40.0 and c.reps == 10 for c in configs)


def test_unknown_grid_rejected():
    with pytest.raises(ValueError):
        grid("weird")


# -- sweep -------------------------------------------------------------------------

def test_sweep_rows_in_grid_then_rep_order(tmp_path):
    base = replace(SimConfig(), duration_days=1.0, reps=2, spots=10, redundancy=2)
    configs = [base, replace(base, pb0=0.1)]
    rows, reports = sweep(configs)
    assert [(r.pb0, r.rep) for r in rows] == \
        [(base.pb0, 0), (base.pb0, 1), (0.1, 0), (0.1, 1)]
    assert len(reports) == 2
    assert all(r.seed == base.base_seed + r.rep for r in rows)


def test_sweep_parallel_matches_serial(tmp_path):
    base = replace(SimConfig(), duration_days=1.0, reps=2, spots=10, redundancy=2)
    configs = [base, replace(base, pb0=0.1)]
    g = GridSpec((base.pb0, 0.1), ((10, 2),), ("standard",))
    f1 = {"out_raw": str(tmp_path / "r1.csv"), "out_mesh": str(tmp_path / "m1.csv")}
    f2 = {"out_raw": str(tmp_path / "r2.csv"), "out_mesh": str(tmp_path / "m2.csv")}
    sweep(configs, jobs=1, grid_spec=g, **f1)
    sweep(configs, jobs=2, grid_spec=g, **f2)
    assert open(f1["out_raw"], "rb").read() == open(f2["out_raw"], "rb").read()
    assert open(f1["out_mesh"], "rb").read() == open(f2["out_mesh"], "rb").read()


def test_failed_run_aborts_with_context():
    bad = replace(SimConfig(), duration_days=1.0, reps=1, spots=10,
                  redundancy=2, period_s=1e12)  # zero rounds -> no transactions
    with pytest.raises(RuntimeError, match="pb0"):
        sweep([bad])


# -- CLI ---------------------------------------------------------------------------

def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "permasim.cli", *args],
                          capture_output=True, text=True)


def test_cli_run_with_config(tmp_path):
    cfgfile = tmp_path / "c.conf"
    cfgfile.write_text("duration.days = 1\ntopology.spots = 10\n"
                       "topology.redundancy = 2\n")
    out = run_cli("run", "--config", str(cfgfile), "--seed", "5")
    assert out.returncode == 0
    assert "str=" in out.stdout


def test_cli_run_bad_config_exit_code(tmp_path):
    cfgfile = tmp_path / "c.conf"
    cfgfile.write_text("fault.pb0 = 2.0\n")
    out = run_cli("run", "--config", str(cfgfile))
    assert out.returncode == 2
    assert "fault.pb0" in out.stderr


def test_cli_sweep_and_report(tmp_path):
    raw = tmp_path / "raw.csv"
    mesh = tmp_path / "mesh.csv"
    out = run_cli("sweep", "--grid", "usecase", "--modes", "standard",
                  "--reps", "2", "--duration-days", "0.5",
                  "--out-raw", str(raw), "--out-mesh", str(mesh))
    assert out.returncode == 0, out.stderr
    assert len(load_raw(str(raw))) == 30 * 2
    assert len(load_mesh(str(mesh))) == 30
    rep = run_cli("report", "--mesh", str(mesh), "--table")
    assert rep.returncode == 0
    assert "standard" in rep.stdout and "max" in rep.stdout


def test_cli_rejects_unknown_mode():
    out = run_cli("sweep", "--grid", "usecase", "--modes", "warp-drive",
                  "--out-raw", "/tmp/x.csv", "--out-mesh", "/tmp/y.csv")
    assert out.returncode == 2
