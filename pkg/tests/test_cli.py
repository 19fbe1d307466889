import json

import pytest

from sgdinfer.cli import main


def test_run_from_config_file(tmp_path, capsys):
    cfg = {
        "model": "linear",
        "d": 2,
        "n": 300,
        "reps": 2,
        "checkpoints": [300],
        "estimators": ["debias", "bm"],
        "seed": 1,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert (out / "runs.csv").exists()
    assert (out / "summary.json").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["n"] == 300


def test_run_flags_override_config(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"model": "linear", "d": 2, "n": 300, "reps": 2}))
    out = tmp_path / "out"
    main(["run", "--config", str(cfg_path), "--reps", "3", "--out", str(out)])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["reps"] == 3


def test_run_from_flags_alone(tmp_path):
    out = tmp_path / "out"
    rc = main([
        "run", "--model", "mean", "--n", "500", "--reps", "2",
        "--estimators", "debias", "--seed", "3", "--out", str(out),
    ])
    assert rc == 0
    assert (out / "summary.json").exists()


def test_run_requires_model_or_config():
    with pytest.raises(SystemExit):
        main(["run", "--n", "100"])


def test_config_file_rejects_unknown_keys(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"model": "linear", "d": 2, "n": 10, "junk": True}))
    with pytest.raises(ValueError, match="unknown config keys"):
        main(["run", "--config", str(cfg_path)])


def test_slope_command(tmp_path, capsys):
    out = tmp_path / "slope"
    rc = main([
        "slope", "--min-pow", "8", "--max-pow", "10", "--reps", "20",
        "--seed", "1", "--out", str(out),
    ])
    assert rc == 0
    data = json.loads((out / "slope.json").read_text())
    assert len(data["points"]) == 3
    assert "slope" in data
    captured = capsys.readouterr().out
    assert "slope" in captured


def test_table_single_cell(tmp_path):
    out = tmp_path / "table"
    rc = main([
        "table", "--model", "linear", "--d", "5", "--reps", "2",
        "--seed", "2", "--out", str(out),
    ])
    assert rc == 0
    rows = json.loads((out / "table.json").read_text())
    # two estimators x three checkpoints
    assert len(rows) == 6
    assert (out / "linear_d5" / "runs.csv").exists()


def test_coverage_single_cell(tmp_path):
    out = tmp_path / "cov"
    rc = main([
        "coverage", "--model", "mean", "--d", "5", "--n", "2000", "--reps", "3",
        "--seed", "2", "--out", str(out),
    ])
    assert rc == 0
    rows = json.loads((out / "coverage.json").read_text())
    assert {r["estimator"] for r in rows} == {"debias", "bm"}
