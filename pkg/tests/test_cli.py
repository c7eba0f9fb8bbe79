import subprocess
import sys

import pytest
import yaml

from rramfv.cli import main
from rramfv.io import RunConfig, parse_config, read_csv


def _summary(path):
    return {row[0]: row[1] for row in read_csv(path)[2]}


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_print_config_round_trips(capsys):
    assert main(["print-config"]) == 0
    text = capsys.readouterr().out
    assert parse_config(text) == RunConfig()


def test_print_config_with_seed(capsys):
    assert main(["print-config", "--seed", "9"]) == 0
    assert yaml.safe_load(capsys.readouterr().out)["seed"] == 9


def test_invalid_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("materials:\n  K1: 9.4\n  bogus: 1\n")
    out = tmp_path / "out"
    assert main(["form", "--config", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()
    assert "bad.yaml:3" in capsys.readouterr().err


def test_negative_seed_exit_2(tmp_path):
    assert main(["form", "--seed", "-1", "--out", str(tmp_path / "o")]) == 2


def test_form_outputs(fast_config, tmp_path):
    out = tmp_path / "form"
    assert main(["form", "--config", str(fast_config), "--out", str(out)]) == 0
    names = set(_files(out))
    assert {"trace.csv", "summary.csv", "snapshot_000.vtk"} <= names
    s = _summary(out / "summary.csv")
    assert isinstance(s["V_f"], float) and s["V_f"] < 0
    assert s["R_final"] < s["R_initial"]
    meta, cols, rows = read_csv(out / "trace.csv")
    assert cols == ["t", "V1", "V2", "I", "T_peak", "N_total"]
    assert meta["config_hash"] == parse_config(fast_config.read_text()).hash()


def test_zero_amplitude_reports_no_forming(fast_config, tmp_path):
    cfg = tmp_path / "zero.yaml"
    cfg.write_text(fast_config.read_text().replace("forming: {amplitude: -2.1", "forming: {amplitude: 0.0"))
    out = tmp_path / "zero"
    assert main(["form", "--config", str(cfg), "--out", str(out)]) == 0
    assert _summary(out / "summary.csv")["V_f"] == "no-forming"


def test_cycle_single_reports_unavailable(fast_config, tmp_path):
    out = tmp_path / "c1"
    assert main(["cycle", "--config", str(fast_config), "--out", str(out), "-n", "1"]) == 0
    s = _summary(out / "summary.csv")
    assert s["cv_HRS"] == "unavailable" and s["cv_LRS"] == "unavailable"
    assert len(read_csv(out / "cycles.csv")[2]) == 1


def test_cycle_bytewise_reproducible(fast_config, tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for d, seed in ((a, "5"), (b, "5"), (c, "6")):
        assert main(["cycle", "--config", str(fast_config), "--out", str(d), "--seed", seed]) == 0
    assert _files(a) == _files(b)
    rows = read_csv(a / "cycles.csv")[2]
    assert [r[0] for r in rows] == [1.0, 2.0]
    assert read_csv(a / "cycles.csv")[2] != read_csv(c / "cycles.csv")[2]


def test_iv_outputs(fast_config, tmp_path):
    out = tmp_path / "iv"
    assert main(["iv", "--config", str(fast_config), "--out", str(out)]) == 0
    _, cols, rows = read_csv(out / "iv.csv")
    assert cols == ["V1", "V2", "I"] and len(rows) == 6


def test_solver_failure_writes_diagnostics(fast_config, tmp_path):
    cfg = tmp_path / "bad_solver.yaml"
    cfg.write_text(fast_config.read_text() + "solver: {outer_max_iters: 1}\ntime_step: {max_retries: 1}\n")
    out = tmp_path / "fail"
    assert main(["form", "--config", str(cfg), "--out", str(out)]) == 1
    assert (out / "diagnostics.json").exists()


@pytest.fixture(scope="module")
def sweep_out(fast_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    status = main(["sweep", "--config", str(fast_config), "--out", str(out), "--jobs", "2"])
    return status, out


def test_sweep_grid(sweep_out):
    status, out = sweep_out
    assert status == 0
    _, cols, rows = read_csv(out / "sweep_map.csv")
    assert cols[:3] == ["K1", "K2", "V_f"]
    assert len(rows) == 4
    assert [(r[0], r[1]) for r in rows] == [(9.4, 5.75), (9.4, 8.0), (12.0, 5.75), (12.0, 8.0)]
    assert all(r[2] == "ok" for r in read_csv(out / "sweep_status.csv")[2])


def test_sweep_matches_form_at_baseline(sweep_out, fast_config, tmp_path):
    _, out = sweep_out
    cfg = tmp_path / "ramp.yaml"
    cfg.write_text(fast_config.read_text() + "protocol: {form_mode: ramp}\n")
    assert main(["form", "--config", str(cfg), "--out", str(tmp_path / "f")]) == 0
    vf = _summary(tmp_path / "f" / "summary.csv")["V_f"]
    assert read_csv(out / "sweep_map.csv")[2][0][2] == vf


def test_validate_quick(capsys):
    assert main(["validate", "--quick"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert all(l.startswith(("PASS", "FAIL")) for l in lines[:-1])


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "rramfv.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("rramfv")
