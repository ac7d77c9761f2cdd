"""Acceptance criteria, one test each.

Every test prints a single ``criterion N PASS|FAIL`` line with the measured
quantities; the lines are collected again in the terminal summary. Run alone
with ``pytest tests/test_acceptance.py -v`` (about 15 minutes on one core).
"""

import time

import numpy as np
import pytest

from covising.evaluate import select_lambda_validation, simulate_roc, stability_selection, tp_at_fp
from covising.fit import (
    DegenerateResponseError,
    FitConfig,
    default_lambda_grid,
    fit,
    fit_joint,
    fit_node,
    fit_separate,
    kkt_residual,
    lambda_max,
    lambda_max_node,
)
from covising.io import theta_to_json, validate_theta_json
from covising.model import (
    Dataset,
    ModelDims,
    ThetaParams,
    exact_pmf,
    grad_neg_cond_loglik,
    neg_cond_loglik,
    num_parameters,
    pair_index,
)
from covising.simulate import SimConfig, exact_sample, gibbs_sample, sample_dataset, simulate_dataset
from covising.theory import assumption_report, empirical_info, population_info_mc

from conftest import random_data, random_theta
from oracles import joint_oracle, node_oracle

RESULTS = []


def report(n, ok, detail, started):
    line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {detail}  ({time.time() - started:.0f}s)"
    print(line)
    RESULTS.append(line)
    return ok


def test_c01_parameter_accounting():
    t = time.time()
    a, b = num_parameters(10, 10), num_parameters(10, 20)
    assert report(1, a == 605 and b == 1155, f"num_parameters(10,10)={a}, (10,20)={b}", t)


def test_c02_gibbs_matches_exact_pmf():
    t = time.time()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(20):
        theta = random_theta(rng, 3, 2, scale=2.0)
        x = rng.standard_normal(2)
        _, probs = exact_pmf(theta, x)
        draws = gibbs_sample(theta, np.tile(x, (50_000, 1)), 500, rng)
        codes = draws.astype(int) @ np.array([4, 2, 1])
        emp = np.bincount(codes, minlength=8) / len(draws)
        worst = max(worst, 0.5 * np.abs(emp - probs).sum())
    assert report(2, worst < 0.02, f"max TV over 20 models = {worst:.4f} (< 0.02)", t)


def test_c03_optimizer_matches_oracle():
    t = time.time()
    rng = np.random.default_rng(3)
    cfg = FitConfig(tol=1e-8)
    gap = kkt = 0.0
    for _ in range(20):
        q, p = int(rng.integers(2, 4)), int(rng.integers(0, 3))
        data = random_data(rng, int(rng.integers(60, 201)), q, p)
        pf = np.r_[1.0, data.X.std(axis=0)]
        j = int(rng.integers(q))
        for frac in (0.5, 0.1):
            lam = frac * lambda_max_node(data, j, cfg)
            res = fit_node(data, j, lam, cfg)
            gap = max(gap, abs(res.objective - node_oracle(data, j, lam, pf)[1]))
            # only node j's regression is solved; check its conditions alone
            kkt = max(kkt, _node_kkt(data, j, res.coef, lam, pf))
            lam = frac * lambda_max(data, "joint", cfg)
            res = fit_joint(data, lam, cfg)
            gap = max(gap, abs(res.objective - joint_oracle(data, lam, pf)[1]))
            kkt = max(kkt, kkt_residual(res.theta_hat, data, lam, "joint", pf))
    ok = gap <= 1e-8 and kkt <= 1e-5
    assert report(3, ok, f"max |objective - oracle| = {gap:.2e} (<= 1e-8), max KKT = {kkt:.2e} (<= 1e-5)", t)


def _node_kkt(data, j, coef, lam, pf):
    g = grad_neg_cond_loglik(coef.ravel(), data, j).reshape(coef.shape)
    w = np.tile(pf, (data.q, 1))
    pen = lam * w
    pen[j, 0] = 0.0
    viol = np.where(coef != 0, np.abs(g + pen * np.sign(coef)), np.maximum(np.abs(g) - pen, 0.0))
    return float(np.max(viol / w))


def test_c04_gradient_and_hessian():
    t = time.time()
    rng = np.random.default_rng(4)
    g_err = h_err = 0.0
    for _ in range(50):
        q, p = int(rng.integers(2, 5)), int(rng.integers(0, 3))
        data = random_data(rng, 50, q, p)
        theta = random_theta(rng, q, p)
        j = int(rng.integers(q))
        v = theta.node(j).ravel()
        E = np.eye(v.size)
        h = 1e-6
        fd = np.array([(neg_cond_loglik(v + h * e, data, j) - neg_cond_loglik(v - h * e, data, j)) / (2 * h) for e in E])
        g = grad_neg_cond_loglik(v, data, j)
        g_err = max(g_err, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
        h = 1e-5
        H = np.array([(grad_neg_cond_loglik(v + h * e, data, j) - grad_neg_cond_loglik(v - h * e, data, j)) / (2 * h) for e in E])
        h_err = max(h_err, np.max(np.abs(empirical_info(data, theta, j).I - H)))
    ok = g_err < 1e-5 and h_err < 1e-4
    assert report(4, ok, f"max gradient rel. error = {g_err:.2e} (< 1e-5), max Hessian entry error = {h_err:.2e} (< 1e-4)", t)


def test_c05_lambda_max_certificate():
    t = time.time()
    rng = np.random.default_rng(5)
    bad = []
    for i in range(20):
        q, p = int(rng.integers(2, 6)), int(rng.integers(0, 4))
        data = random_data(rng, int(rng.integers(40, 200)), q, p)
        for mode in ("separate-max", "separate-min", "joint"):
            lmax = lambda_max(data, mode)
            if fit(data, 1.01 * lmax, mode).support_size != 0 or fit(data, 0.5 * lmax, mode).support_size == 0:
                bad.append((i, mode))
    assert report(5, not bad, f"{60 - len(bad)}/60 instance-mode pairs certified", t)


def test_c06_symmetrization_semantics():
    t = time.time()
    rng = np.random.default_rng(6)
    nested = symmetric = 0
    for _ in range(20):
        q, p = int(rng.integers(3, 6)), int(rng.integers(1, 4))
        data = random_data(rng, 80, q, p)
        lam = rng.uniform(0.05, 0.6) * lambda_max(data, "separate-max")
        res, est = fit_separate(data, lam)
        smax = res.theta_hat.support()
        smin = fit(data, lam, "separate-min").theta_hat.support()
        nested += smin <= smax
        joint = fit(data, lam, "joint").theta_hat
        dense = np.array(joint.dense())
        try:
            validate_theta_json(theta_to_json(joint))
            symmetric += bool(np.array_equal(dense, dense.transpose(1, 0, 2)))
        except ValueError:
            pass
    ok = nested == 20 and symmetric == 20
    assert report(6, ok, f"min-support within max-support {nested}/20, joint exactly symmetric {symmetric}/20", t)


def _mean_auc(mode, **kw):
    base = dict(dims=ModelDims(10, 20), n=200, n_E=20, rho=0.5, beta=4.0)
    base.update(kw)
    return float(np.mean([simulate_roc(SimConfig(seed=s, **base), mode)["auc"] for s in range(5)]))


def test_c07_sparsity_trend():
    t = time.time()
    parts, ok = [], True
    for mode in ("separate-max", "joint"):
        sparse = _mean_auc(mode, n_E=10, rho=0.2)
        dense = _mean_auc(mode, n_E=30, rho=0.8)
        ok &= sparse >= dense
        parts.append(f"{mode}: AUC(10,0.2)={sparse:.3f} >= AUC(30,0.8)={dense:.3f}")
    assert report(7, ok, "; ".join(parts), t)


def test_c08_signal_trend():
    t = time.time()
    parts, ok = [], True
    for mode in ("separate-max", "joint"):
        aucs = [_mean_auc(mode, beta=b) for b in (0.5, 1.0, 2.0, 4.0)]
        ok &= bool(np.all(np.diff(aucs) >= 0))
        parts.append(f"{mode}: beta 0.5,1,2,4 -> " + ", ".join(f"{a:.3f}" for a in aucs))
    assert report(8, ok, "; ".join(parts), t)


def test_c09_noise_covariate_trend():
    t = time.time()
    parts, ok = [], True
    for mode in ("separate-max", "joint"):
        tps = []
        for p_total in (10, 50, 200):
            vals = [
                tp_at_fp(simulate_roc(SimConfig(ModelDims(10, 10), 200, 20, 0.5, 4.0, seed=s,
                                                p_noise=p_total - 10), mode)["curve"], 50)
                for s in range(5)
            ]
            tps.append(float(np.mean(vals)))
        ok &= tps[2] < tps[0]
        parts.append(f"{mode}: TP@FP50 for p_total 10,50,200 -> " + ", ".join(f"{v:.1f}" for v in tps))
    assert report(9, ok, "; ".join(parts), t)


C10 = dict(q=5, p=3, n_E=5, rho=0.5, beta=4.0, candidates=100, n_mc=20_000)


def _c10_truth(seed):
    cfg = SimConfig(ModelDims(C10["q"], C10["p"]), 10, C10["n_E"], C10["rho"], C10["beta"], seed=seed)
    return simulate_dataset(cfg)[1].theta_star


def _c10_screen(theta, seed):
    rng = np.random.default_rng(seed)
    reps = [assumption_report(theta, population_info_mc(theta, j, C10["n_mc"], rng)) for j in range(theta.q)]
    return min(r.alpha_slack for r in reps), min(r.delta_min for r in reps)


def _exact_recovery(theta, n, seed):
    rng = np.random.default_rng(seed)
    train = sample_dataset(theta, n, rng, 200)
    valid = sample_dataset(theta, n, rng, 200)
    try:
        grid = default_lambda_grid(train, "separate-max")
    except DegenerateResponseError:
        return False  # a constant response column cannot be fitted, so nothing is recovered
    _, res = select_lambda_validation(train, valid, grid, "separate-max")
    mask = theta.penalized_mask()
    return bool(np.array_equal(res.theta_hat.coef[mask] != 0, theta.coef[mask] != 0))


def test_c10_support_consistency():
    t = time.time()
    screened, scores = [], []
    for seed in range(C10["candidates"]):
        theta = _c10_truth(seed)
        a, d = _c10_screen(theta, seed)
        scores.append((a, d, seed))
        if a >= 0.25 and d >= 0.1:
            screened.append(seed)
        if len(screened) == 10:
            break
    best_a = max(s[0] for s in scores)
    best_d = max(s[1] for s in scores)
    ns = (200, 1000, 5000)
    if len(screened) < 10:
        # not enough admissible instances: run the protocol on the least
        # incoherent candidates for information only, then fail
        chosen = [s[2] for s in sorted(scores, reverse=True)[:10]]
        freq = [np.mean([_exact_recovery(_c10_truth(s), n, 1000 + s) for s in chosen]) for n in ns]
        detail = (f"only {len(screened)}/{len(scores)} candidates pass the screen "
                  f"(best alpha_slack={best_a:.3f} vs 0.25, best delta_min={best_d:.2e} vs 0.1); "
                  f"unscreened recovery n=200,1000,5000 -> " + ", ".join(f"{f:.1f}" for f in freq))
        assert report(10, False, detail, t)
    freq = [np.mean([_exact_recovery(_c10_truth(s), n, 1000 + s) for s in screened]) for n in ns]
    ok = bool(np.all(np.diff(freq) >= 0)) and freq[-1] >= 0.8
    assert report(10, ok, "recovery n=200,1000,5000 -> " + ", ".join(f"{f:.1f}" for f in freq), t)


def _planted(seed):
    # strong main-effect coupling between nodes 0 and 1; their intercepts at
    # -beta/2 keep both margins near one half
    q, p, beta = 4, 1, 8.0
    coef = np.zeros((q * (q + 1) // 2, p + 1))
    coef[pair_index(0, 1, q), 0] = beta
    coef[pair_index(0, 0, q), 0] = coef[pair_index(1, 1, q), 0] = -beta / 2
    theta = ThetaParams(ModelDims(q, p), coef)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((1000, p))
    return Dataset(X, gibbs_sample(theta, X, 500, rng))


def test_c11_stability_selection():
    t = time.time()
    planted, null, plain_null = [], [], []
    for seed in range(5):
        data = _planted(seed)
        s = stability_selection(data, n_subsamples=100, rng=seed, error_control=1.0)
        planted.append(s.fstar_of(0, 1, 0))
        null.append(s.fstar_of(2, 3, 0))
        plain_null.append(float(s.freq[:, pair_index(2, 3, 4), 0].max()))
        if seed == 0:
            again = stability_selection(data, n_subsamples=100, rng=seed, error_control=1.0)
            deterministic = np.array_equal(s.freq, again.freq) and np.array_equal(s.fstar, again.fstar)
    mp, mn = float(np.median(planted)), float(np.median(null))
    ok = mp >= 0.9 and mn <= 0.3 and deterministic
    detail = (f"median f* planted (0,1,0) = {mp:.2f} (>= 0.9), null (2,3,0) = {mn:.2f} (<= 0.3), "
              f"deterministic={deterministic}; full-grid null f* median = {np.median(plain_null):.2f}")
    assert report(11, ok, detail, t)


def test_c12_information_convergence():
    t = time.time()
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(5):
        theta = random_theta(rng, 3, 2, scale=1.0)
        X = rng.standard_normal((100_000, 2))
        data = Dataset(X, exact_sample(theta, X, rng))
        for j in range(3):
            In = empirical_info(data, theta, j).I
            Istar = population_info_mc(theta, j, 1_000_000, rng).I
            worst = max(worst, np.max(np.abs(In - Istar)) / np.max(np.abs(Istar)))
    assert report(12, worst <= 0.05, f"max relative ||I_n - I*||_max = {worst:.4f} (<= 0.05)", t)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
