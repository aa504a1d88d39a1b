import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from colearn.cli import main
from colearn.config import intrusion_run
from colearn.engine import concentration_time, moving_average

ROOT = Path(__file__).resolve().parents[1]
EXAMPLES = ROOT / "docs" / "examples"


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def read_csv(path):
    rows = list(csv.DictReader(io.StringIO(Path(path).read_text())))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def test_shipped_schemas_match_package():
    pkg = ROOT / "src" / "colearn" / "schemas"
    for f in pkg.glob("*.schema.json"):
        assert (ROOT / "docs" / f.name).read_text() == f.read_text()


@pytest.mark.parametrize("path", sorted(EXAMPLES.glob("*.json")), ids=lambda p: p.name)
def test_examples_validate(path):
    assert main(["validate", "--config", str(path)]) == 0


def test_simulate_minimal(tmp_path):
    out = tmp_path / "out"
    cfg = write(tmp_path, intrusion_run(T=5, seeds=[0]))
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    data = read_csv(out / "run_0.csv")
    assert data["t"].tolist() == [1, 2, 3, 4, 5]
    summary = json.loads((out / "summary.json").read_text())
    assert "concentration_time" in summary["seeds"][0]
    assert summary["config"]["T"] == 5


def test_invalid_config_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    doc = intrusion_run(T=5, seeds=[0])
    doc["T"] = 0
    assert main(["simulate", "--config", write(tmp_path, doc), "--out", str(out)]) == 2
    assert "T" in capsys.readouterr().err
    assert not out.exists()
    doc = intrusion_run(T=5, seeds=[0], obs_scale=-1.0)
    assert main(["simulate", "--config", write(tmp_path, doc), "--out", str(out)]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", str(out)]) == 2
    assert not out.exists()


def test_output_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("COLEARN_OUT", str(tmp_path / "env-out"))
    assert main(["simulate", "--config", write(tmp_path, intrusion_run(T=3, seeds=[1]))]) == 0
    assert (tmp_path / "env-out" / "run_1.csv").exists()


def test_paper_scale_flag(tmp_path):
    out = tmp_path / "big"
    cfg = write(tmp_path, intrusion_run(T=3, seeds=[0]))
    assert main(["simulate", "--config", cfg, "--out", str(out), "--paper-scale"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seeds"][0]["steps"] == 3


def test_reruns_and_jobs_are_byte_identical(tmp_path):
    cfg = write(tmp_path, intrusion_run(T=30, seeds=[0, 1, 2]))
    dirs = [tmp_path / d for d in ("a", "b", "c")]
    assert main(["simulate", "--config", cfg, "--out", str(dirs[0])]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(dirs[1])]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(dirs[2]), "--jobs", "2"]) == 0
    for seed in range(3):
        texts = {(d / f"run_{seed}.csv").read_bytes() for d in dirs}
        assert len(texts) == 1
    assert len({(d / "summary.json").read_bytes() for d in dirs}) == 1


def test_summary_recomputable_from_csv(tmp_path):
    out = tmp_path / "out"
    cfg = write(tmp_path, intrusion_run(T=40, seeds=[3, 4]))
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    gamma = 0.95
    for entry in summary["seeds"]:
        d = read_csv(out / f"run_{entry['seed']}.csv")
        disc = gamma ** (d["t"] - 1)
        assert entry["discounted_cost"] == pytest.approx(float(disc @ d["cost_D"]), rel=1e-9)
        assert entry["final_thm1_stat"] == pytest.approx(d["thm1_stat"][-1], rel=1e-9, abs=1e-12)
        z = np.array([d["Z_0"][-1], d["Z_1"][-1]])
        best = int(np.argmin(z))
        assert entry["argmin_conjecture"] == best
        assert entry["concentration_time"] == concentration_time(d[f"mu_{best}"])
        # posterior-weighted excess divergence
        recomputed = d["mu_0"] * d["deltaK_0"] + d["mu_1"] * d["deltaK_1"]
        assert np.allclose(recomputed, d["thm1_stat"], atol=1e-9)
    assert moving_average(d["thm1_stat"]).size == 21


def test_oracle_diff_pass_and_fault(tmp_path, capsys):
    ok = {"kind": "oracle-diff", "seed": 1,
          "suites": [{"type": "belief", "instances": 3, "max_length": 3},
                     {"type": "rollout", "instances": 4}]}
    assert main(["oracle-diff", "--config", write(tmp_path, ok)]) == 0
    assert "PASS" in capsys.readouterr().out
    bad = {"kind": "oracle-diff", "seed": 1,
           "suites": [{"type": "belief", "instances": 5, "fault": "drop-observation"}]}
    assert main(["oracle-diff", "--config", write(tmp_path, bad)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_oracle_diff_empty_suite_and_budget(tmp_path, capsys):
    empty = {"kind": "oracle-diff", "suites": [{"type": "belief", "instances": 0}]}
    assert main(["oracle-diff", "--config", write(tmp_path, empty)]) == 0
    assert "total comparisons 0" in capsys.readouterr().out
    tight = {"kind": "oracle-diff", "node_budget": 1, "suites": [{"type": "rollout", "instances": 3}]}
    assert main(["oracle-diff", "--config", write(tmp_path, tight)]) == 3
    assert "lookahead" in capsys.readouterr().err


@pytest.mark.parametrize("name, code, clause", [("berk_accept.json", 0, None),
                                               ("berk_reject_i.json", 1, "(i)"),
                                               ("berk_reject_ii.json", 1, "(ii)")])
def test_berk_check(name, code, clause, capsys):
    assert main(["berk-check", "--config", str(EXAMPLES / name)]) == code
    out = capsys.readouterr().out
    if clause is None:
        assert out.startswith("accept")
    else:
        assert out.startswith("reject") and f"clause {clause}" in out


def test_berk_check_shape_errors(tmp_path):
    doc = json.loads((EXAMPLES / "berk_accept.json").read_text())
    doc["posteriors"][0] = [0.5, 0.5]
    assert main(["berk-check", "--config", write(tmp_path, doc)]) == 2


def test_validate_rejects_bad_game(tmp_path, capsys):
    game = json.loads((EXAMPLES / "coordination_game.json").read_text())
    game["initial_belief"] = [0.7, 0.7]
    assert main(["validate", "--config", write(tmp_path, game)]) == 2
    assert capsys.readouterr().err
    assert main(["validate", "--config", write(tmp_path, {"kind": "nope"})]) == 2
