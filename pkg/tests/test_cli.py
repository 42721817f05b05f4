import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from gapkit.approximator import TemplateFamily
from gapkit.cli import main
from gapkit.combinators import select_base_graph
from gapkit.multigraph import Multigraph, cycle_graph


@pytest.fixture
def runner():
    return CliRunner()


def run(runner, *args):
    res = runner.invoke(main, [str(a) for a in args], catch_exceptions=False)
    assert res.exit_code == 0, res.output
    return res


def test_gen_random_and_gamma(runner, tmp_path):
    path = tmp_path / "g.json"
    run(runner, "gen-random", "--n", 20, "--d", 3, "--seed", 1, "--out", path)
    g = Multigraph.load(path)
    assert g.n == 20 and g.degree == 3 and g.is_simple
    metric = tmp_path / "m.json"
    metric.write_text(json.dumps({"n": 2, "d": [[0, 1], [1, 0]]}))
    out = json.loads(run(runner, "gamma", "--graph", path, "--metric", metric, "--mode", "local",
                         "--restarts", 5).output)
    assert out["gamma_estimate"] > 0 and not out["plus"]
    line = json.loads(run(runner, "gamma", "--graph", path).output)
    assert line["mode"] == "spectral"


def test_gen_random_pairing_to_stdout(runner):
    data = json.loads(run(runner, "gen-random", "--model", "pairing", "--n", 4, "--d", 3).output)
    assert Multigraph.from_json(data).degree == 3


def test_build_expander(runner, tmp_path):
    base, _ = select_base_graph(27, 3)
    base.save(tmp_path / "base.json")
    run(runner, "build-expander", "--base", tmp_path / "base.json", "--depth", 1, "--out", tmp_path / "out")
    prov = json.loads((tmp_path / "out" / "provenance.json").read_text())
    assert prov["m"] == 1 and prov["iterates"][0]["j"] == 1
    assert Multigraph.load(tmp_path / "out" / "G1.json").n == 2187


def test_l1_embed_sparse(runner, tmp_path):
    cycle_graph(10).save(tmp_path / "c.json")
    prefix = tmp_path / "emb"
    run(runner, "l1-embed-sparse", "--graph", tmp_path / "c.json", "--delta", 0.05, "--samples", 20,
        "--out", prefix)
    D = np.loadtxt(f"{prefix}.csv", delimiter=",")
    rep = json.loads(open(f"{prefix}.json").read())
    assert D.shape == (20, 20) and rep["points"] == 20 and rep["distortion"] >= 1
    res = runner.invoke(main, ["l1-embed-sparse", "--graph", str(tmp_path / "c.json"), "--delta", "0.05",
                               "--trees", "1", "--out", str(prefix)])
    assert res.exit_code != 0


def test_battery(runner, tmp_path):
    cycle_graph(60).save(tmp_path / "c.json")
    out = json.loads(run(runner, "battery", "--graph", tmp_path / "c.json", "--K", 2, "--delta", 0.25).output)
    assert out["expansion"] == "fail" and out["sparsity"]["verdict"] == "member"


def test_kleinberg(runner, tmp_path):
    path = tmp_path / "k.csv"
    run(runner, "kleinberg", "--n", 32, "--trials", 3, "--c", 10, "--out", path)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 3 and rows[0]["perm"] == "random"
    res = run(runner, "kleinberg", "--n", 32, "--trials", 2, "--c", 1, "--perm", "identity", "--dependent")
    rows = list(csv.DictReader(res.output.splitlines()))
    assert all(r["passed"] == "False" for r in rows)


def test_approx_build_and_run(runner, tmp_path):
    TemplateFamily.random(smallest=16, largest=256, seed=0).save(tmp_path / "fam")
    out = json.loads(run(runner, "approx", "build", "--template-dir", tmp_path / "fam", "--n", 40).output)
    assert out["edges"] <= out["edge_bound"] and sum(p[2] for p in out["pairs"]) == out["edges"]
    report = tmp_path / "r.csv"
    res = run(runner, "approx", "run", "--m", 60, "--n", 16, "--trials", 3, "--template-dir", tmp_path / "fam",
              "--out", report)
    assert "D_emp" in res.output
    assert len(list(csv.DictReader(open(report)))) == 6
