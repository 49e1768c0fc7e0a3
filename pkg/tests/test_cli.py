from __future__ import annotations

import json

import pytest

from l1fd.cli import main


def test_list(capsys):
    assert main(["verify-bounds", "--list"]) == 0
    assert "fractional_moment" in capsys.readouterr().out


def test_unknown_check_is_usage_error():
    assert main(["verify-bounds", "--checks", "no_such_check"]) == 2


def test_bad_arguments_exit_2():
    assert main(["build-index"]) == 2
    assert main(["nonsense"]) == 2


def test_empty_check_list_writes_empty_report(tmp_path):
    out = tmp_path / "r.jsonl"
    assert main(["verify-bounds", "--out", str(out)]) == 0
    assert out.read_text() == ""


def test_report_bytes_reproducible(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    args = ["verify-bounds", "--checks", "fractional_moment,dimension_plan", "--seed", "3"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rec = json.loads(a.read_text().splitlines()[0])
    assert set(rec) == {"schema", "experiment", "bound_name", "parameters", "empirical_value",
                        "analytic_value", "standard_error", "pass", "wall_clock_seconds"}
    assert rec["wall_clock_seconds"] is None


def test_seed_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 3}))
    base = ["verify-bounds", "--checks", "fractional_moment"]
    paths = {name: tmp_path / f"{name}.jsonl" for name in ("flag", "config", "env", "other")}
    assert main(base + ["--seed", "3", "--out", str(paths["flag"])]) == 0
    monkeypatch.setenv("L1FD_SEED", "99")
    assert main(base + ["--config", str(cfg), "--out", str(paths["config"])]) == 0
    monkeypatch.setenv("L1FD_SEED", "3")
    assert main(base + ["--out", str(paths["env"])]) == 0
    assert main(base + ["--seed", "4", "--config", str(cfg), "--out", str(paths["other"])]) == 0
    assert paths["flag"].read_bytes() == paths["config"].read_bytes() == paths["env"].read_bytes()
    assert paths["other"].read_bytes() != paths["flag"].read_bytes()


def test_pipeline(tmp_path, capsys):
    data, index, answers = tmp_path / "data", tmp_path / "index", tmp_path / "ans.jsonl"
    assert main(["gen-data", "--out", str(data), "--n", "200", "--d", "12",
                 "--planted-queries", "5", "--control-queries", "3", "--seed", "1"]) == 0
    assert main(["build-index", "--points", str(data), "--out", str(index), "--epsilon", "0.25",
                 "--variant", "grid", "--k", "32", "--m", "3", "--seed", "2"]) == 0
    assert main(["query", "--index", str(index), "--queries", str(data), "--out", str(answers)]) == 0
    rows = [json.loads(line) for line in answers.read_text().splitlines()]
    assert len(rows) == 8
    for r in rows[5:]:
        assert r["answer"] is None
    for r in rows:
        if r["answer"] is not None:
            assert r["distance"] <= 1 + 9 * 0.25
    rep = tmp_path / "exp.jsonl"
    main(["experiment", "--data", str(data), "--k", "32", "--seed", "2", "--out", str(rep)])
    capsys.readouterr()
    assert main(["report", str(rep)]) == 0
    assert "records" in capsys.readouterr().out
