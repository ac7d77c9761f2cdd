import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covising import cli
from covising.fit import fit, lambda_max
from covising.io import (
    ParseError,
    read_dataset,
    read_theta,
    theta_from_json,
    theta_to_json,
    write_dataset,
    write_theta,
)
from covising.model import Dataset, ModelDims, ThetaParams
from covising.theory import assumption_report, empirical_info

from conftest import random_theta


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 12), p=st.integers(0, 3))
def test_dataset_round_trip_is_exact(tmp_path_factory, seed, n, p):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p)) * 10.0 ** rng.integers(-8, 8, (n, p))
    data = Dataset(X, (rng.random((n, 3)) < 0.5).astype(float))
    d = tmp_path_factory.mktemp("ds")
    write_dataset(d, data)
    assert read_dataset(d) == data


def test_theta_round_trip(tmp_path):
    theta = random_theta(np.random.default_rng(0), 3, 2)
    write_theta(tmp_path / "t.json", theta)
    assert read_theta(tmp_path / "t.json") == theta


def test_theta_validator_rejects_bad_documents():
    doc = theta_to_json(ThetaParams.zeros(2, 0))
    swapped = json.loads(json.dumps(doc))
    swapped["coefficients"][1].update(j=1, k=0)
    with pytest.raises(ParseError, match="j=1 > k=0"):
        theta_from_json(swapped)
    dup = json.loads(json.dumps(doc))
    dup["coefficients"][2] = dict(dup["coefficients"][1])
    with pytest.raises(ParseError, match="duplicate"):
        theta_from_json(dup)
    short = json.loads(json.dumps(doc))
    short["coefficients"].pop()
    with pytest.raises(ParseError, match="expected 3"):
        theta_from_json(short)


def test_parse_errors_point_at_location(tmp_path):
    (tmp_path / "X.csv").write_text("1,2\n3,oops\n")
    (tmp_path / "Y.csv").write_text("0\n1\n")
    with pytest.raises(ParseError, match=r"X.csv:2: column 2"):
        read_dataset(tmp_path)
    (tmp_path / "X.csv").write_text("1,2\n3,4\n")
    (tmp_path / "Y.csv").write_text("0\n2\n")
    with pytest.raises(ParseError, match=r"Y.csv:2: column 1"):
        read_dataset(tmp_path)


def run(argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    code = run(["simulate", "--q", 5, "--p", 2, "--n", 150, "--n-E", 5, "--beta", 1.0,
                "--gibbs-sweeps", 50, "--seed", 4, "--n-valid", 150, "--out", out])
    assert code == 0
    return out


def test_simulate_outputs_and_determinism(sim_dir, tmp_path):
    data = read_dataset(sim_dir)
    assert (data.n, data.q, data.p) == (150, 5, 2)
    assert len((sim_dir / "Y.csv").read_text().splitlines()) == 150
    assert (sim_dir / "seed.txt").read_text() == "4\n"
    assert run(["simulate", "--config", sim_dir / "run_config.json",
                "--out", tmp_path]) == 0
    for name in ("X.csv", "Y.csv", "theta_star.json", "graph.tsv"):
        assert (tmp_path / name).read_bytes() == (sim_dir / name).read_bytes()


def test_simulate_matches_library(sim_dir):
    from covising.simulate import SimConfig, simulate_dataset

    data, truth = simulate_dataset(SimConfig(ModelDims(5, 2), 150, 5, 0.5, 1.0, 50, 4))
    assert read_dataset(sim_dir) == data
    assert read_theta(sim_dir / "theta_star.json") == truth.theta_star


def test_fit_above_lambda_max_has_no_edges(sim_dir, tmp_path):
    data = read_dataset(sim_dir)
    lmax = lambda_max(data, "joint")
    assert run(["fit", "--data", sim_dir, "--mode", "joint", "--lambda", 1.01 * lmax, "--out", tmp_path]) == 0
    report = json.loads((tmp_path / "fit_report.json").read_text())
    assert report["lambda_max"] == lmax
    rows = list(csv.DictReader(open(tmp_path / "edge_list.tsv"), delimiter="\t"))
    assert all(r["j"] == r["k"] and r["l"] == "0" for r in rows)
    theta = read_theta(tmp_path / "theta_hat.json")  # passes the validator
    dense = np.array(theta.dense())
    np.testing.assert_array_equal(dense, dense.transpose(1, 0, 2))


@pytest.mark.parametrize("mode", ["joint", "separate-max"])
def test_fit_warm_refit_reproduces_objective(sim_dir, tmp_path, mode):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["fit", "--data", sim_dir, "--mode", mode, "--lambda", 0.03, "--out", a]) == 0
    assert run(["fit", "--data", sim_dir, "--mode", mode, "--lambda", 0.03,
                "--init", a / "theta_hat.json", "--out", b]) == 0
    ra = json.loads((a / "fit_report.json").read_text())
    rb = json.loads((b / "fit_report.json").read_text())
    assert abs(ra["objective"] - rb["objective"]) <= 1e-10
    lib = fit(read_dataset(sim_dir), 0.03, mode)
    assert read_theta(a / "theta_hat.json") == lib.theta_hat


def test_fit_with_validation_split(sim_dir, tmp_path):
    assert run(["fit", "--data", sim_dir, "--valid", sim_dir / "valid", "--lambda-grid", 8, "--out", tmp_path]) == 0
    assert json.loads((tmp_path / "fit_report.json").read_text())["warnings"]


def test_path_and_roc_files(sim_dir, tmp_path):
    assert run(["path", "--data", sim_dir, "--out", tmp_path]) == 0
    rows = list(csv.DictReader(open(tmp_path / "path.csv")))
    assert len(rows) == 50 and rows[0]["support_size"] == "0"
    assert run(["roc", "--data", sim_dir, "--truth", sim_dir / "theta_star.json", "--lambda-grid", 12,
                "--svg", "--out", tmp_path]) == 0
    roc = list(csv.DictReader(open(tmp_path / "roc.csv")))
    assert len(roc) == 12 and float(roc[0]["sensitivity"]) == 0.0
    # independent trapezoid over the CSV, closed at (0, 0) and (1, 1)
    pts = sorted([(0.0, 0.0), (1.0, 1.0)] + [
        (float(r["one_minus_specificity"]), float(r["sensitivity"])) for r in roc])
    area = sum((x1 - x0) * (y0 + y1) / 2 for (x0, y0), (x1, y1) in zip(pts, pts[1:]))
    assert abs(area - float((tmp_path / "auc.txt").read_text())) < 1e-9
    assert (tmp_path / "roc.svg").read_text().startswith("<svg")


def test_stability_and_hubs_files(sim_dir, tmp_path):
    assert run(["stability", "--data", sim_dir, "--n-subsamples", 1, "--lambda-grid", 6, "--out", tmp_path]) == 0
    rows = list(csv.DictReader(open(tmp_path / "stability.csv")))
    assert {float(r["fstar"]) for r in rows} <= {0.0, 1.0}
    assert len(rows) == 15 * 3 - 5
    ranks = list(csv.DictReader(open(tmp_path / "edge_rank_0.tsv"), delimiter="\t"))
    assert len(ranks) == 10
    assert run(["hubs", "--data", sim_dir, "--n-subsamples", 3, "--lambda-grid", 6, "--out", tmp_path]) == 0
    for l in range(3):
        hubs = list(csv.DictReader(open(tmp_path / f"hub_rank_{l}.tsv"), delimiter="\t"))
        med = [float(r["median_rank"]) for r in hubs]
        assert med == sorted(med) and len(hubs) == 5


def test_assumptions_match_library(sim_dir, tmp_path):
    assert run(["assumptions", "--truth", sim_dir / "theta_star.json", "--data", sim_dir, "--out", tmp_path]) == 0
    report = json.loads((tmp_path / "assumption_report.json").read_text())
    data, theta = read_dataset(sim_dir), read_theta(sim_dir / "theta_star.json")
    for j, node in enumerate(report["nodes"]):
        ref = assumption_report(theta, empirical_info(data, theta, j)).as_dict()
        for key in ("alpha_slack", "delta_min", "delta_max", "incoherence"):
            assert node[key] == pytest.approx(ref[key], abs=1e-12, rel=1e-12)


def test_assumptions_zero_model_is_vacuous(tmp_path):
    write_theta(tmp_path / "zero.json", ThetaParams.zeros(3, 1))
    assert run(["assumptions", "--truth", tmp_path / "zero.json", "--n-mc", 2000, "--out", tmp_path]) == 0
    report = json.loads((tmp_path / "assumption_report.json").read_text())
    assert report["vacuous_all"] and all(n["support"] == [] for n in report["nodes"])


def test_exit_codes(sim_dir, tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "X.csv").write_text("1\nx\n")
    (bad / "Y.csv").write_text("0\n1\n")
    assert run(["fit", "--data", bad, "--lambda", 0.1, "--out", tmp_path]) == cli.EXIT_PARSE
    (bad / "X.csv").write_text("1\n2\n3\n")
    assert run(["fit", "--data", bad, "--lambda", 0.1, "--out", tmp_path]) == cli.EXIT_DIMENSION
    (bad / "X.csv").write_text("1\n2\n")
    (bad / "Y.csv").write_text("1\n1\n")
    assert run(["fit", "--data", bad, "--lambda", 0.1, "--out", tmp_path]) == cli.EXIT_DEGENERATE
    assert "node 0" in capsys.readouterr().err
    assert run(["fit", "--data", sim_dir, "--lambda", 0.001, "--mode", "joint", "--out", tmp_path,
                "--config", write_config(tmp_path, {"max_passes": 1})]) == cli.EXIT_NONCONVERGED
    assert (tmp_path / "theta_hat.json").exists()
    with pytest.raises(SystemExit) as exc:
        run(["fit", "--lambda", 0.1, "--lambda-grid", 5])
    assert exc.value.code == cli.EXIT_USAGE


def write_config(d, obj):
    path = d / "cfg.json"
    path.write_text(json.dumps(obj, indent=1))
    return path


def test_config_errors_name_the_line(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text('{\n "seed": 1,\n "rho": "high"\n}\n')
    assert run(["simulate", "--config", path, "--out", tmp_path]) == cli.EXIT_PARSE
    assert "cfg.json:3" in capsys.readouterr().err
    path.write_text('{\n "seed": 1,\n "bogus": 2\n}\n')
    assert run(["simulate", "--config", path, "--out", tmp_path]) == cli.EXIT_PARSE
    assert "cfg.json:3: unknown setting 'bogus'" in capsys.readouterr().err


def test_flags_override_config(tmp_path):
    cfg = write_config(tmp_path, {"q": 4, "p": 1, "n": 20, "n_E": 3, "gibbs_sweeps": 5, "seed": 1})
    assert run(["simulate", "--config", cfg, "--seed", 9, "--out", tmp_path / "o"]) == 0
    echoed = json.loads((tmp_path / "o" / "run_config.json").read_text())
    assert echoed["seed"] == 9 and echoed["q"] == 4 and echoed["command"] == "simulate"
