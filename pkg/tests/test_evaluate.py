import numpy as np
import pytest

from covising.evaluate import (
    RocCurve,
    RocPoint,
    auc,
    confusion,
    hub_ranking,
    rank_edges,
    roc_curve,
    scored_mask,
    select_lambda_validation,
    stability_selection,
    tp_at_fp,
)
from covising.fit import default_lambda_grid, fit_path
from covising.model import Dataset, ModelDims, ThetaParams, pair_index

from conftest import random_data


def curve_from(points):
    return RocCurve(tuple(RocPoint(0.0, tpr, fpr, 0, 0, 0, 0) for fpr, tpr in points), "all")


def test_auc_rectangle_and_diagonal():
    # a single point at (0, 1) closes to the unit square
    assert auc(curve_from([(0.0, 1.0)])) == 1.0
    assert auc(curve_from([(0.5, 0.5)])) == pytest.approx(0.5)
    # step at fpr 0.25 to tpr 0.75: 0.25 * 0.375 + 0.75 * 0.875
    assert auc(curve_from([(0.25, 0.75), (1.0, 1.0)])) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        auc(RocCurve((), "all"))


def test_confusion_counts_and_scopes():
    truth = ThetaParams.zeros(3, 1).coef.copy()
    truth[pair_index(0, 1, 3), 0] = 1.0
    truth[pair_index(1, 1, 3), 1] = 1.0
    truth[pair_index(2, 2, 3), 0] = 1.0  # intercept: never scored
    est = np.zeros_like(truth)
    est[pair_index(0, 1, 3), 0] = 0.2
    est[pair_index(0, 2, 3), 1] = -0.1
    t, e = ThetaParams(ModelDims(3, 1), truth), ThetaParams(ModelDims(3, 1), est)
    assert scored_mask(t).sum() == 12 - 3
    assert confusion(e, t, "all") == (1, 1, 6, 1)
    assert confusion(e, t, "edges") == (1, 1, 4, 0)
    with pytest.raises(ValueError):
        confusion(e, t, "nodes")


def test_roc_curve_along_path():
    data = random_data(np.random.default_rng(0), 60, 3, 1)
    path = fit_path(data, default_lambda_grid(data, "joint", n_lambda=6), "joint")
    truth = path[-1].theta_hat
    curve = roc_curve(path, truth)
    fpr, tpr = curve.arrays()
    assert tpr[0] == 0.0 and tpr[-1] == 1.0 and fpr[-1] == 0.0
    assert len(curve.points) == 6


def test_tp_at_fp_interpolates():
    pts = tuple(RocPoint(0.0, 0.0, 0.0, tp, fp, 0, 0) for tp, fp in [(2, 0), (4, 10), (6, 30)])
    curve = RocCurve(pts, "all")
    assert tp_at_fp(curve, 0) == 2
    assert tp_at_fp(curve, 5) == pytest.approx(3.0)
    assert tp_at_fp(curve, 20) == pytest.approx(5.0)
    assert tp_at_fp(curve, 100) == 6


def test_validation_picks_minimum_and_ties_go_to_larger_lambda():
    rng = np.random.default_rng(4)
    train, valid = random_data(rng, 60, 3, 1), random_data(rng, 60, 3, 1)
    grid = default_lambda_grid(train, "joint", n_lambda=5)
    lam, res = select_lambda_validation(train, valid, grid, "joint")
    assert lam in grid and res.lam == lam
    # constant responses in a grid above lambda_max: every fit is identical
    lam, _ = select_lambda_validation(train, valid, grid[0] * np.array([4.0, 3.0, 2.0]), "joint")
    assert lam == 4.0 * grid[0]


def planted_data(seed, n=400):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 1))
    y0 = rng.random(n) < 0.5
    y1 = np.where(rng.random(n) < 0.9, y0, ~y0)
    Y = np.column_stack([y0, y1, rng.random(n) < 0.5]).astype(float)
    return Dataset(X, Y)


def test_stability_selection_finds_planted_pair_and_is_deterministic():
    data = planted_data(0)
    s1 = stability_selection(data, n_subsamples=10, rng=1)
    s2 = stability_selection(data, n_subsamples=10, rng=1)
    np.testing.assert_array_equal(s1.freq, s2.freq)
    assert s1.fstar_of(0, 1, 0) == 1.0
    assert s1.subsample_fraction == 0.5
    ranked = rank_edges(s1, 0)
    assert ranked[0][:2] == (0, 1)
    cross = rank_edges(s1, 0, groups=["a", "a", "b"])
    assert {r[:2] for r in cross} == {(0, 2), (1, 2)}
    assert [r[2] for r in cross] == sorted((r[2] for r in cross), reverse=True)


def test_single_subsample_frequencies_are_binary():
    s = stability_selection(planted_data(1), n_subsamples=1, rng=0)
    assert set(np.unique(s.fstar)) <= {0.0, 1.0}


def test_stability_selection_counts_degenerate_subsamples():
    rng = np.random.default_rng(2)
    data = random_data(rng, 12, 3, 1)
    Y = data.Y.copy()
    Y[:, 2] = 0.0
    Y[0, 2] = 1.0  # one positive: half-samples often miss it
    s = stability_selection(Dataset(data.X, Y), lambdas=[0.2, 0.1], n_subsamples=8, rng=3)
    assert s.n_skipped > 0


def test_hub_ranking_orders_by_degree():
    q, p = 4, 1
    coef = np.zeros((10, 2))
    for k in (1, 2, 3):
        coef[pair_index(0, k, q), 1] = 1.0
    coef[pair_index(1, 2, q), 1] = 1.0
    theta = ThetaParams(ModelDims(q, p), coef)
    h = hub_ranking([theta, theta], 1)
    assert h.order[0] == (0, 1.0)
    np.testing.assert_array_equal(h.median_rank, [1.0, 2.5, 2.5, 4.0])
    assert list(h.median_rank[[j for j, _ in h.order]]) == sorted(h.median_rank)
    with pytest.raises(IndexError):
        hub_ranking([theta], 2)
