import json

import numpy as np
import pytest

from otda.cli import run
from otda.measures import load_csv, make_empirical, save_csv


@pytest.fixture
def pair(tmp_path):
    s, t = tmp_path / "s.csv", tmp_path / "t.csv"
    code = run(["gen", "--generator", "two_moons", "--n", "40", "--rotation", "30",
                "--seed", "1", "--out-src", str(s), "--out-tgt", str(t)])
    assert code == 0
    return s, t


def test_gen_then_solve(pair, tmp_path):
    s, t = pair
    out = tmp_path / "plan.json"
    assert run(["ot", "solve", "--source", str(s), "--target", str(t), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert "w1" in doc and len(doc["coupling"]) == 40


def test_gen_is_deterministic(tmp_path):
    args = ["gen", "--generator", "gaussian_shift", "--n", "20", "--seed", "5"]
    run(args + ["--out-src", str(tmp_path / "a.csv"), "--out-tgt", str(tmp_path / "b.csv")])
    run(args + ["--out-src", str(tmp_path / "c.csv"), "--out-tgt", str(tmp_path / "d.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()


def test_sinkhorn_output(pair, tmp_path):
    s, t = pair
    out = tmp_path / "ent.json"
    assert run(["ot", "sinkhorn", "--source", str(s), "--target", str(t), "--eps", "0.05",
                "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert {"w1", "coupling", "marginal_violation", "iterations"} <= set(doc)


def test_missing_file_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code = run(["ot", "solve", "--source", str(missing), "--target", str(missing)])
    assert code == 1
    assert str(missing) in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert run(["ot", "solve", "--frobnicate"]) == 1
    assert run(["nonsense"]) == 1


def test_underflow_exit_2(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    save_csv(make_empirical([[0.0, 0.0], [1.0, 0.0]]), a)
    save_csv(make_empirical([[1000.0, 0.0], [1001.0, 0.0]]), b)
    code = run(["ot", "sinkhorn", "--source", str(a), "--target", str(b),
                "--eps", "1e-9", "--no-log"])
    assert code == 2
    assert "underflow" in capsys.readouterr().err


def test_nonconvergence_exit_2_with_report(pair, tmp_path):
    s, t = pair
    out = tmp_path / "partial.json"
    code = run(["ot", "sinkhorn", "--source", str(s), "--target", str(t), "--eps", "1e-3",
                "--max-iters", "2", "--out", str(out)])
    assert code == 2
    assert json.loads(out.read_text())["status"] == "max_iters"


def test_adapt(pair, tmp_path):
    s, t = pair
    out = tmp_path / "mapped.csv"
    assert run(["adapt", "--source", str(s), "--target", str(t), "--out", str(out)]) == 0
    mapped = load_csv(out)
    np.testing.assert_array_equal(mapped.labels, load_csv(s).labels)


def test_adapt_multi_and_barycenter(tmp_path):
    paths = []
    for k in range(2):
        s, t = tmp_path / f"s{k}.csv", tmp_path / f"t{k}.csv"
        run(["gen", "--n", "15", "--rotation", str(10 * k), "--seed", str(k),
             "--out-src", str(s), "--out-tgt", str(t)])
        paths.append((s, t))
    out, rep = tmp_path / "m.csv", tmp_path / "rep.json"
    code = run(["adapt-multi", "--sources", str(paths[0][0]), str(paths[1][0]),
                "--target", str(paths[0][1]), "--alphas", "0.5,0.5",
                "--out", str(out), "--report", str(rep)])
    assert code == 0
    assert "eq1_objective" in json.loads(rep.read_text())
    bary = tmp_path / "bary.json"
    code = run(["barycenter", "--inputs", str(paths[0][0]), str(paths[1][1]),
                "--weights", "0.3,0.7", "--grid", "auto", "--out", str(bary)])
    assert code == 0
    assert "objective" in json.loads(bary.read_text())


def test_lambda(pair, tmp_path):
    s, t = pair
    out = tmp_path / "lam.json"
    assert run(["lambda", "--source", str(s), "--target", str(t), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["lambda_hat"] >= 0.0


def test_bound_and_thm5(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schema": 1, "theorem": "unsup_thm2",
                               "settings": {"n_points": 30}, "seeds": [2]}))
    out = tmp_path / "b.json"
    assert run(["bound", "unsup", "--config", str(cfg), "--out", str(out)]) == 0
    assert "rhs_total" in json.loads(out.read_text())["report"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema": 1, "theorem": "thm5", "seeds": [0]}))
    assert run(["run", "--config", str(bad), "--out-dir", str(tmp_path / "x")]) == 1
    assert "theorem" in capsys.readouterr().err


def test_run_experiment_counts_and_rerun(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schema": 1, "theorem": "combined_thm3",
                               "settings": {"n_points": 60, "n_eval": 100},
                               "grid": {"alpha": [0.25, 0.75]}, "seeds": [0, 1, 2]}))
    for d in ("a", "b"):
        assert run(["run-experiment", "--config", str(cfg), "--out-dir", str(tmp_path / d)]) == 0
    assert len(list((tmp_path / "a" / "reports").glob("*.json"))) == 6
    assert (tmp_path / "a" / "aggregate.csv").read_bytes() == \
        (tmp_path / "b" / "aggregate.csv").read_bytes()


def test_divergence_and_concentration(tmp_path):
    out, summ = tmp_path / "rows.csv", tmp_path / "summary.json"
    assert run(["divergence", "chain", "--pairs", "50", "--out", str(out),
                "--summary", str(summ)]) == 0
    assert json.loads(summ.read_text())["n_pairs"] == 50
    conc = tmp_path / "conc.json"
    assert run(["concentration", "--sizes", "10,40", "--trials", "3", "--out", str(conc)]) == 0
