import json

import numpy as np
import pytest

from calmkit.cli import main
from calmkit.core import IterateTrace

LASSO = {"n": 2,
         "loss": {"family": "quadratic", "Q": [[1.0, 0.0], [0.0, 1.0]],
                  "q": [-4.0, 0.0]},
         "penalty": {"family": "l1", "lambda": 1.0}}

ADMM = {"theta1": {"family": "quadratic", "Q": [[1.0]], "q": [0.0]},
        "theta2": {"family": "quadratic", "Q": [[1.0]], "q": [0.0]},
        "A": [[1.0]], "B": [[1.0]], "b": [1.0], "beta": 1.0}

PDHG = {"phi1": {"family": "quadratic", "Q": [[1.0]], "q": [0.0]},
        "phi2": {"family": "quadratic", "Q": [[1.0]], "q": [0.0]},
        "K": [[1.0]], "tau": 0.5, "sigma": 0.5}


def write(tmp_path, name, obj):
    p = tmp_path / name
    with open(p, "w") as fh:
        json.dump(obj, fh)
    return str(p)


def test_solve_pg_writes_trace_and_summary(tmp_path, capsys):
    prob = write(tmp_path, "p.json", LASSO)
    out = str(tmp_path / "trace.csv")
    summ = str(tmp_path / "s.json")
    rc = main(["solve", "--problem", prob, "--solver", "pg", "--gamma", "0.5",
               "--max-iter", "200", "--out", out, "--summary", summ])
    assert rc == 0
    with open(summ) as fh:
        s = json.load(fh)
    tr = IterateTrace.read_csv(out)
    assert len(tr) == s["iterations"] + 1
    assert s["final_F"] == pytest.approx(-4.5, abs=1e-9)


def test_solve_rejects_large_gamma_in_theory_mode(tmp_path):
    prob = write(tmp_path, "p.json", LASSO)
    rc = main(["solve", "--problem", prob, "--solver", "pg", "--gamma", "1.5",
               "--max-iter", "10", "--out", str(tmp_path / "t.csv")])
    assert rc == 2


def test_admm_qp_reaches_kkt(tmp_path):
    prob = write(tmp_path, "a.json", ADMM)
    out = str(tmp_path / "kkt.csv")
    summ = str(tmp_path / "s.json")
    rc = main(["solve", "--problem", prob, "--solver", "admm",
               "--max-iter", "400", "--stop-tol", "1e-15",
               "--out", out, "--summary", summ])
    assert rc == 0
    rows = open(out).read().strip().splitlines()
    last = rows[-1].split(",")
    # final errors vs (reference = final iterate) are zero; inclusion <= 1e-8
    assert float(last[-1]) <= 1e-8


def test_pdhg_runs(tmp_path):
    prob = write(tmp_path, "p.json", PDHG)
    rc = main(["solve", "--problem", prob, "--solver", "pdhg",
               "--max-iter", "300", "--stop-tol", "1e-14",
               "--out", str(tmp_path / "t.csv"),
               "--x0", "1.0,-1.0"])
    assert rc == 0


def test_diagnose_round_trip_reproduces_in_process(tmp_path, capsys):
    from calmkit.core import SolverConfig, problem_from_json
    from calmkit.diagnostics import verify_sufficient_descent
    from calmkit.solvers import pg_solve
    prob_path = write(tmp_path, "p.json", LASSO)
    out = str(tmp_path / "trace.csv")
    main(["solve", "--problem", prob_path, "--solver", "pg", "--gamma", "0.5",
          "--max-iter", "100", "--out", out])
    capsys.readouterr()
    rep_path = str(tmp_path / "rep.json")
    rc = main(["diagnose", "--trace", out, "--problem", prob_path,
               "--gamma", "0.5", "--oracle-box=-6,6", "--probes", "10",
               "--out", rep_path])
    assert rc == 0
    with open(rep_path) as fh:
        rep = json.load(fh)
    assert rep["kappa1"] == 0.5 and rep["kappa2"] == 3.0
    assert rep["sufficient_descent"]["ok"]
    assert rep["cost_to_go"]["ok"]
    assert rep["classification"] == "proximal"
    assert "kappa_hat" in rep and "rate_fit" in rep
    # bit-for-bit: the same checks in process give identical results
    prob = problem_from_json(LASSO)
    tr = pg_solve(prob, SolverConfig(gamma=0.5, max_iter=100, lipschitz_L=1.0),
                  np.zeros(2))
    in_proc = verify_sufficient_descent(tr, 0.5, 1.0)
    assert in_proc.to_json() == rep["sufficient_descent"]


def test_diagnose_without_oracle_box_has_skip_marker(tmp_path, capsys):
    prob_path = write(tmp_path, "p.json", LASSO)
    out = str(tmp_path / "trace.csv")
    main(["solve", "--problem", prob_path, "--solver", "pg", "--gamma", "0.5",
          "--max-iter", "60", "--out", out])
    capsys.readouterr()
    rc = main(["diagnose", "--trace", out, "--problem", prob_path,
               "--gamma", "0.5"])
    captured = capsys.readouterr().out
    assert rc == 0
    rep = json.loads(captured)
    assert "skipped" in rep["kappa_hat"]


def test_certify_cli(tmp_path, capsys):
    prob_path = write(tmp_path, "p.json", LASSO)
    pt = write(tmp_path, "x.json", {"x": [3.0, 0.0]})
    rc = main(["certify", "--problem", prob_path, "--point", pt,
               "--conditions", "nnamcq,foscms,polyhedral"])
    assert rc == 0
    reports = json.loads(capsys.readouterr().out)
    assert [r["verdict"] for r in reports] == ["holds", "holds", "holds"]


def test_certify_non_stationary_point_exit_4(tmp_path, capsys):
    prob_path = write(tmp_path, "p.json", LASSO)
    pt = write(tmp_path, "x.json", {"x": [0.0, 0.0]})
    rc = main(["certify", "--problem", prob_path, "--point", pt,
               "--conditions", "nnamcq"])
    assert rc == 4


def test_oracle_prox_cli(capsys):
    rc = main(["oracle", "prox", "--family", "negabs", "--lambda", "1.0",
               "--u", "0.0", "--gamma", "1.0", "--window", "5.0"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["minimizers"]) == 2


def test_explain_dumps_cone_atoms(capsys):
    rc = main(["explain", "--penalty", '{"family":"scad","lambda":1.0,"a":3.0}',
               "--point", "0,1", "--direction", "0,-1"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["classification"]["kind"] == "vertex"
    assert any(a["kind"] == "sector" for a in out["limiting_normal"])
    assert out["directional_normal"][0]["kind"] == "line"


def test_reproduce_example_5_1(capsys):
    rc = main(["reproduce", "example-5-1"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert all(c["matches"] for c in out["cases"])
    assert "reflection" in " ".join(out["notes"])


def test_reproduce_table_1_case_6_box_scoped(capsys):
    rc = main(["reproduce", "table-1", "--case", "6", "--max-iter", "6000"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["L_scope"] == "box"
    assert out["sufficient_descent"]["ok"]
    assert out["classification"] == "proximal"
