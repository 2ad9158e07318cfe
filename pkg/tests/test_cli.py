import csv
import json
import math

import numpy as np
import pytest

from spinbarrier.cli import main
from spinbarrier.config import parse_config
from spinbarrier.outputs import pairs_matrix, read_trace_csv, trace_csv_text
from spinbarrier.experiments import FidelityTrace

SHORT = ["--set", "integrator.t_max=1"]
SHORT_RWA = ["--set", "integrator.t_max=1", "--set", "integrator.frame=rwa"]


def write_config(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def cw_config(tmp_path):
    return write_config(tmp_path / "cw.ini", "[run]\nscenario = cw_decoupling\n")


def listed_outputs(run_dir):
    manifest = json.loads((run_dir / "manifest.json").read_text())
    return manifest, set(manifest["outputs"])


def test_run_writes_outputs(tmp_path, cw_config):
    out = tmp_path / "run"
    assert main(["run", "--config", cw_config, "--out", str(out), *SHORT]) == 0
    cols = read_trace_csv(out / "trace.csv")
    assert list(cols)[:5] == ["t", "fidelity", "p0", "p1", "pT"]
    assert np.all(np.diff(cols["t"]) > 0)
    manifest, outputs = listed_outputs(out)
    # every file but the manifest itself is listed exactly once
    assert outputs == {p.name for p in out.iterdir()} - {"manifest.json"}
    assert manifest["schema_version"] == "1.0"
    assert manifest["exit_status"] == 0
    assert manifest["diagnostics"]["trace_drift"] < 1e-6
    assert parse_config(out / "config.ini") == parse_config(cw_config, ["integrator.t_max=1"])


def test_csv_format_is_fixed(tmp_path, cw_config):
    out = tmp_path / "run"
    main(["run", "--config", cw_config, "--out", str(out), *SHORT_RWA])
    raw = (out / "trace.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    row = raw.decode().splitlines()[2].split(",")
    assert float(row[0]) == pytest.approx(0.002)
    trace = FidelityTrace(np.array([0.1]), np.array([1 / 3]), np.array([0.0]), np.array([1.0]), np.array([0.0]))
    assert trace_csv_text(trace).splitlines()[1] == "0.10000000000000001,0.33333333333333331,0,1,0"


def test_run_is_byte_identical_on_rerun(tmp_path, cw_config):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--config", cw_config, "--out", str(a), *SHORT])
    main(["run", "--config", cw_config, "--out", str(b), *SHORT])
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()


def test_jump_run_has_finite_stderr_columns_and_is_deterministic(tmp_path):
    cfg = write_config(tmp_path / "jump.ini", "[run]\nscenario = jump_crosscheck\n")
    args = ["--config", cfg, *SHORT_RWA, "--trajectories", "60", "--seed", "11"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--out", str(a), *args]) == 0
    main(["run", "--out", str(b), *args])
    cols = read_trace_csv(a / "trace.csv")
    for name in ("fidelity_se", "p0_se", "p1_se", "pT_se"):
        assert np.all(np.isfinite(cols[name]))
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["seeds"]["master_seed"] == 11 and manifest["seeds"]["n_traj"] == 60
    assert "lindblad_max_deviation" in manifest["diagnostics"]


def test_three_site_run_writes_gate_report(tmp_path):
    out = tmp_path / "gate"
    assert main(["run", "--out", str(out), "--set", "run.scenario=three_site_gate", *SHORT]) == 0
    _, outputs = listed_outputs(out)
    assert "gate_report.json" in outputs
    report = json.loads((out / "gate_report.json").read_text())
    u = pairs_matrix(report["u_extracted"])
    assert u.shape == (4, 4)
    assert report["gate_fidelity"] > 1 - 1e-5
    assert report["barrier_revival_population"] > 1 - 1e-6


def test_gate_verb(tmp_path, capsys):
    out = tmp_path / "g"
    assert main(["gate", "--out", str(out), "--set", "chain.j_z=1", "--periods", "2"]) == 0
    report = json.loads((out / "gate_report.json").read_text())
    assert report["periods"] == 2 and report["gate_fidelity"] > 1 - 1e-6
    assert report["t_r"] == pytest.approx(math.pi / 3)
    assert "fidelity" in capsys.readouterr().out


def test_gate_verb_rejects_two_site_chain(tmp_path):
    assert main(["gate", "--out", str(tmp_path / "g"), "--set", "chain.sites=2"]) == 2


def test_sweep_over_gamma(tmp_path, cw_config):
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", cw_config, "--out", str(out), "--axis", "decay.gamma",
                 "--values", "0,4,13,40", "--jobs", "2", *SHORT_RWA])
    assert code == 0
    with open(out / "sweep_summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["value"] for r in rows] == ["0", "4", "13", "40"]
    assert all(r["status"] == "ok" for r in rows)
    f_end = [float(r["F_t1"]) for r in rows]
    assert all(b <= a + 0.01 for a, b in zip(f_end, f_end[1:]))
    assert math.isnan(float(rows[0]["k_fit"])) and float(rows[1]["k_fit"]) > 0
    subdirs = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert subdirs == ["00_decay.gamma=0", "01_decay.gamma=4", "02_decay.gamma=13", "03_decay.gamma=40"]
    manifest = json.loads((out / "sweep_manifest.json").read_text())
    assert manifest["failed_runs"] == 0 and len(manifest["runs"]) == 4


def test_sweep_over_pulse_area(tmp_path):
    cfg = write_config(tmp_path / "p.ini", "[run]\nscenario = pulsed_decoupling\n"
                                           "[drive]\npulse_duration = 0.001\n")
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", cfg, "--out", str(out), "--axis", "drive.pulse_area",
                 "--values", "pi,2pi,4pi", *SHORT])
    assert code == 0
    periods = []
    for d in sorted(p for p in out.iterdir() if p.is_dir()):
        periods.append(json.loads((d / "manifest.json").read_text())["config"]["drive"]["repetition_period"])
    # same average amplitude: period grows with the area
    np.testing.assert_allclose(periods, [math.pi / 40, 2 * math.pi / 40, 4 * math.pi / 40])


def test_sweep_marks_failed_rows_and_continues(tmp_path, cw_config):
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", cw_config, "--out", str(out), "--axis", "decay.gamma",
                 "--values", "0,-1,4", *SHORT_RWA])
    assert code == 2
    with open(out / "sweep_summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["status"] for r in rows] == ["ok", "SchemaError", "ok"]


def test_sweep_empty_values_is_error(tmp_path, cw_config):
    assert main(["sweep", "--config", cw_config, "--out", str(tmp_path / "s"),
                 "--axis", "decay.gamma", "--values", " , "]) == 2
    assert main(["sweep", "--config", cw_config, "--out", str(tmp_path / "s"),
                 "--axis", "decay.gamma", "--values", "a,b"]) == 2


@pytest.fixture
def four_traces(tmp_path, cw_config):
    paths = []
    for gamma in (0, 4, 13, 40):
        out = tmp_path / f"g{gamma}"
        main(["run", "--config", cw_config, "--out", str(out), *SHORT_RWA,
              "--set", f"decay.gamma={gamma}", "--set", f"run.label=gamma {gamma}"])
        paths.append(str(out / "trace.csv"))
    return paths


def test_plot_one_and_four_traces(tmp_path, four_traces):
    one = tmp_path / "one.svg"
    assert main(["plot", four_traces[0], "--out", str(one)]) == 0
    svg = one.read_text()
    assert svg.count("<polyline") == 1
    assert "t [1/J_XY]" in svg and ">F</text>" in svg
    four = tmp_path / "plots" / "four.svg"
    assert main(["plot", *four_traces, "--out", str(four)]) == 0
    svg = four.read_text()
    assert svg.count("<polyline") == 4
    for gamma in (0, 4, 13, 40):
        assert f"gamma {gamma}<" in svg
    manifest = json.loads((tmp_path / "plots" / "four.svg.json").read_text())
    assert manifest["outputs"] == ["four.svg"]


def test_plot_rejects_empty_and_malformed_files(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["plot", str(empty), "--out", str(tmp_path / "x.svg")]) == 5
    assert "empty.csv" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("t,fidelity\n0,1\n0.1,abc\n")
    assert main(["plot", str(bad), "--out", str(tmp_path / "x.svg")]) == 5
    assert "bad.csv" in capsys.readouterr().err


def test_exit_codes(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path / "o")]) == 2
    bad = write_config(tmp_path / "bad.ini", "[run]\nscenario = cw_decoupling\n[integrator]\ndt = 0.01\n")
    assert main(["run", "--config", bad, "--out", str(tmp_path / "o")]) == 2
    assert "integrator.dt" in capsys.readouterr().err
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--set", "run.scenario=laser_off_baseline", *SHORT,
                 "--out", str(blocker / "sub")]) == 5


def test_flagged_revival_exit_code(tmp_path, monkeypatch):
    import spinbarrier.cli as cli
    from spinbarrier.gates import extract_gate, revival_time

    def half_period(chain, integrator=None, periods=1):
        return extract_gate(chain, integrator, t=0.5 * revival_time(chain.j_xy, chain.j_z))

    monkeypatch.setattr(cli, "extract_gate", half_period)
    out = tmp_path / "g"
    assert main(["gate", "--out", str(out)]) == 4
    assert json.loads((out / "gate_report.json").read_text())["flagged"] is True


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "8/8 checks passed" in out
