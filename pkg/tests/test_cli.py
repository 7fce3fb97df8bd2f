import csv
import io
import json
import math

import numpy as np
import pytest

from piecewise_net import cli, metrics, tables
from piecewise_net import network as nw
from piecewise_net.config import ExperimentConfig

TINY = {
    "problem": "aniso2d_heart",
    "mode": "solve",
    "encoding": {"scheme": "embedding", "embed_dim": 1},
    "width": 5,
    "points": {"M": 30, "M_b": 8, "M_gamma": 8},
    "optimizer": {"max_iters": 3},
    "trials": 2,
    "seed": 1,
    "grid_res": 11,
}


def _write(tmp_path, data, name="exp.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_dry_run_prints_parameter_count(tmp_path, capsys):
    path = _write(tmp_path, dict(TINY, width=50))
    assert cli.main(["dry-run", "--config", path]) == 0
    out = capsys.readouterr().out
    assert "N_p          252" in out
    assert cli.main(["solve", "--config", path, "--dry-run"]) == 0
    assert not (tmp_path / "runs").exists()


def test_embed_dim_with_scalar_scheme_exits_2(tmp_path, capsys):
    bad = dict(TINY, encoding={"scheme": "scalar", "labels": "nominal", "embed_dim": 1})
    assert cli.main(["run", "--config", _write(tmp_path, bad)]) == 2
    assert "embed_dim" in capsys.readouterr().err


def test_unknown_problem_and_missing_file_exit_2(tmp_path, capsys):
    assert cli.main(["run", "--config", _write(tmp_path, dict(TINY, problem="x"))]) == 2
    assert "unknown problem" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["frobnicate"]) == 2


def test_verb_must_match_mode(tmp_path):
    assert cli.main(["approximate", "--config", _write(tmp_path, TINY)]) == 2


def test_unwritable_output_exits_3(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    path = _write(tmp_path, TINY)
    assert cli.main(["run", "--config", path, "--out", str(blocker / "out")]) == 3
    assert "not writable" in capsys.readouterr().err


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    path = _write(tmp_path, TINY)
    assert cli.main(["solve", "--config", path, "--out", str(out)]) in (0, 4)
    names = sorted(p.name for p in out.iterdir())
    assert names == [
        "grid.csv",
        "params_0.bin",
        "params_1.bin",
        "report.csv",
        "resolved_config.json",
        "trace_0.csv",
        "trace_1.csv",
    ]
    # resolved settings re-validate to the same experiment
    resolved = ExperimentConfig.load(out / "resolved_config.json")
    assert resolved == ExperimentConfig.load(path).replace(out=str(out))
    rows = list(csv.DictReader(io.StringIO((out / "report.csv").read_text())))
    assert [r["trial"] for r in rows] == ["0", "1", "mean"]
    assert all(r["n_params"] == "27" for r in rows)
    trace = (out / "trace_0.csv").read_text().splitlines()
    assert trace[0] == "iteration,loss,mu,step_norm,accepted"
    theta, header = nw.load_params(out / "params_0.bin")
    assert theta.size == 27 and header["scheme"] == "embedding"
    grid = list(csv.DictReader(io.StringIO((out / "grid.csv").read_text())))
    assert len(grid) == 11 * 11
    assert set(grid[0]) == {"x1", "x2", "region", "u_N", "abs_err"}
    assert {g["region"] for g in grid} == {"0", "1"}


def test_run_is_deterministic(tmp_path):
    path = _write(tmp_path, TINY)
    for name in ("a", "b"):
        cli.main(["run", "--config", path, "--out", str(tmp_path / name)])
    for f in ("report.csv", "trace_0.csv", "params_1.bin", "grid.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_and_trial_overrides(tmp_path):
    path = _write(tmp_path, TINY)
    out = tmp_path / "o"
    cli.main(["run", "--config", path, "--out", str(out), "--trials", "1", "--seed-override", "9"])
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["trials"] == 1 and resolved["seed"] == 9
    assert not (out / "trace_1.csv").exists()


def test_all_trials_failed_exits_4(tmp_path, capsys):
    # a single iteration cannot bring the heart loss below the failure threshold
    path = _write(tmp_path, dict(TINY, optimizer={"max_iters": 1}))
    assert cli.main(["run", "--config", path, "--out", str(tmp_path / "o")]) == 4
    assert "every trial failed" in capsys.readouterr().err


def test_reproduce_unknown_table_exits_2(capsys):
    assert cli.main(["reproduce", "t9"]) == 2
    assert "unknown table" in capsys.readouterr().err


def _fake_report(failed):
    def run(config, n_trials=None, jobs=1):
        value = math.nan if failed else 1e-8
        loss = math.nan if failed else 1e-20
        trials = [
            metrics.TrialResult(i, value, value, loss, 1, "max-iterations", 0.0)
            for i in range(config.trials)
        ]
        return metrics.TrialReport(
            config.encoding.describe(), config.problem, metrics.count_params(config), trials
        )

    return run


def test_reproduce_reports_expected_failures(monkeypatch, tmp_path, capsys):
    row = next(r for r in tables.get("t3").rows if r.expect_failure and "10 pieces" in r.label)
    monkeypatch.setitem(tables.TABLES, "t3", tables.Table("t3", "subset", (row,)))
    monkeypatch.setattr(metrics, "run_trials", _fake_report(failed=True))
    assert cli.main(["reproduce", "t3", "--trials", "2", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "fails to converge (expected)" in out
    assert "SE (nominal)" in out
    assert (tmp_path / "t3.csv").exists()


@pytest.mark.parametrize("key, counts", [("t1", [255, 250, 450]), ("t7", [605, 600, 1000])])
def test_reproduce_rows_and_parameter_counts(monkeypatch, capsys, key, counts):
    monkeypatch.setattr(metrics, "run_trials", _fake_report(failed=False))
    assert cli.main(["reproduce", key, "--trials", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()[2:5]
    assert [int(line.split()[-7]) for line in lines] == counts
    assert all(line.endswith("pass") for line in lines)


def test_write_atomic_leaves_no_temporaries(tmp_path):
    target = tmp_path / "x.txt"
    cli.write_atomic(str(target), "hello")
    cli.write_atomic(str(target), b"bytes")
    assert target.read_bytes() == b"bytes"
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]


def test_grid_marks_outside_cells():
    cfg = ExperimentConfig.from_dict(dict(TINY, problem="func2d_multiregion", mode="approximate",
                                          points={"M": 10, "M_b": 4}))
    report = metrics.run_trials(cfg.replace(trials=1))
    t = report.trials[0]
    text = cli.grid_csv(cfg, t.layout, t.theta, 9)
    rows = list(csv.DictReader(io.StringIO(text)))
    corner = rows[0]
    assert corner["region"] == "-1" and corner["u_N"] == "" and corner["abs_err"] == ""
    inside = [r for r in rows if r["region"] != "-1"]
    assert all(np.isfinite(float(r["u_N"])) for r in inside)
