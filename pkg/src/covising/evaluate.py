"""Support-recovery scoring, validation tuning and stability selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .fit import FitConfig, FitResult, default_lambda_grid, fit_path
from .model import Dataset, DimensionError, ThetaParams, pseudo_neg_loglik
from .simulate import GroundTruth, SimConfig, sample_dataset, simulate_dataset

__all__ = [
    "RocPoint",
    "RocCurve",
    "StabilitySummary",
    "HubRanking",
    "scored_mask",
    "confusion",
    "roc_curve",
    "auc",
    "tp_at_fp",
    "select_lambda_validation",
    "stability_selection",
    "rank_edges",
    "hub_ranking",
    "simulate_roc",
]

log = logging.getLogger(__name__)

_SCOPES = {"all": "all", "all-penalized": "all", "edges": "edges", "edges-only": "edges"}


def _scope(scope: str) -> str:
    try:
        return _SCOPES[scope]
    except KeyError:
        raise ValueError(f"scope must be one of {sorted(_SCOPES)}, got {scope!r}") from None


def _theta(obj) -> ThetaParams:
    if isinstance(obj, FitResult):
        return obj.theta_hat
    if isinstance(obj, GroundTruth):
        return obj.theta_star
    return obj


def scored_mask(theta: ThetaParams, scope: str = "all") -> np.ndarray:
    """Coordinates of the packed storage that enter the confusion counts.

    Node intercepts never count; ``'edges'`` further drops every node pair ``(j, j)``.
    """
    scope = _scope(scope)
    mask = theta.penalized_mask()
    if scope == "edges":
        rows, cols = np.triu_indices(theta.q)
        mask &= (rows != cols)[:, None]
    return mask


def confusion(theta_hat, truth, scope: str = "all") -> tuple[int, int, int, int]:
    """``(tp, fp, tn, fn)`` of the exact-zero pattern of ``theta_hat`` against ``truth``."""
    est, ref = _theta(theta_hat), _theta(truth)
    if est.dims != ref.dims:
        raise DimensionError(f"estimate dims {est.dims} differ from truth dims {ref.dims}")
    mask = scored_mask(ref, scope)
    pred = est.coef[mask] != 0
    real = ref.coef[mask] != 0
    tp = int(np.sum(pred & real))
    fp = int(np.sum(pred & ~real))
    tn = int(np.sum(~pred & ~real))
    fn = int(np.sum(~pred & real))
    return tp, fp, tn, fn


@dataclass(frozen=True)
class RocPoint:
    lam: float
    sensitivity: float
    one_minus_specificity: float
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass(frozen=True)
class RocCurve:
    points: tuple
    scope: str

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """``(one_minus_specificity, sensitivity)`` in path order."""
        fpr = np.array([pt.one_minus_specificity for pt in self.points])
        tpr = np.array([pt.sensitivity for pt in self.points])
        return fpr, tpr


def _rate(num: int, den: int) -> float:
    return num / den if den else 0.0


def roc_curve(path_results: Sequence, truth, scope: str = "all") -> RocCurve:
    """One ROC point per fitted penalty level."""
    scope = _scope(scope)
    pts = []
    for res in path_results:
        tp, fp, tn, fn = confusion(res, truth, scope)
        lam = res.lam if isinstance(res, FitResult) else float("nan")
        pts.append(RocPoint(lam, _rate(tp, tp + fn), _rate(fp, fp + tn), tp, fp, tn, fn))
    return RocCurve(tuple(pts), scope)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve, closed with ``(0, 0)`` and ``(1, 1)``."""
    if not curve.points:
        raise ValueError("empty ROC curve")
    fpr, tpr = curve.arrays()
    x = np.concatenate([[0.0], fpr, [1.0]])
    y = np.concatenate([[0.0], tpr, [1.0]])
    order = np.lexsort((y, x))
    return float(np.trapezoid(y[order], x[order]))


def tp_at_fp(curve: RocCurve, fp_target: float) -> float:
    """True-positive count at a given false-positive count, linear between path points.

    Points are ordered by false positives; beyond the last point the curve is
    held flat at its final true-positive count.
    """
    fp = np.array([0] + [pt.fp for pt in curve.points], dtype=float)
    tp = np.array([0] + [pt.tp for pt in curve.points], dtype=float)
    order = np.lexsort((tp, fp))
    fp, tp = fp[order], tp[order]
    # keep the best tp for each fp so interpolation sees a function
    ufp, first = np.unique(fp, return_index=True)
    last = np.r_[first[1:], fp.size] - 1
    return float(np.interp(fp_target, ufp, tp[last]))


def select_lambda_validation(
    train: Dataset,
    valid: Dataset,
    lambdas: Sequence[float],
    mode: str = "separate-max",
    config: FitConfig | None = None,
) -> tuple[float, FitResult]:
    """Penalty minimizing the pseudo negative log-likelihood on ``valid``.

    Returns the chosen penalty and its fit; ties go to the larger penalty.
    """
    if train.dims != valid.dims:
        raise DimensionError("train and validation data have different dimensions")
    path = fit_path(train, lambdas, mode, config)
    scores = [pseudo_neg_loglik(res.theta_hat, valid) for res in path]
    best = int(np.argmin(scores))  # first minimum in descending order = largest penalty
    return path[best].lam, path[best]


@dataclass(frozen=True)
class StabilitySummary:
    """Selection frequencies over subsamples.

    ``freq[i]`` is the ``(q (q + 1) / 2, p + 1)`` frequency table at ``lambdas[i]``
    in packed pair order; ``fstar`` is its maximum over the first ``n_used``
    penalties and ``argmax_lambda`` the (largest) penalty attaining it.
    ``q_lambda[i]`` is the mean size, over subsamples, of the union of
    penalized coordinates selected anywhere in ``lambdas[:i + 1]``.
    """

    lambdas: np.ndarray
    freq: np.ndarray
    fstar: np.ndarray
    argmax_lambda: np.ndarray
    q: int
    p: int
    n_subsamples: int
    subsample_fraction: float
    n_skipped: int = 0
    retained: tuple = ()
    retained_lambda: float | None = None
    n_used: int | None = None
    q_lambda: np.ndarray | None = None

    def fstar_of(self, j: int, k: int, l: int) -> float:
        from .model import pair_index

        return float(self.fstar[pair_index(j, k, self.q), l])


def stability_selection(
    data: Dataset,
    lambdas: Sequence[float] | None = None,
    mode: str = "separate-max",
    config: FitConfig | None = None,
    n_subsamples: int = 100,
    rng=None,
    retain_lambda: float | None = None,
    error_control: float | None = None,
    threshold: float = 0.9,
) -> StabilitySummary:
    """Refit on ``n_subsamples`` half-samples drawn without replacement.

    The penalty grid defaults to the 50-point grid of the full data, shared by
    all subsamples. A subsample whose response column is constant records that
    node (joint mode: the whole fit) as all-zero; such events are counted in
    ``n_skipped``. With ``retain_lambda`` the fit at the nearest grid penalty is
    kept for every subsample (input to :func:`hub_ranking`).

    With ``error_control`` set to a bound ``EV`` on the expected number of
    false selections at frequency ``threshold``, ``f*`` is taken only over
    the leading penalties whose ``q_lambda`` satisfies the Meinshausen and
    Buhlmann condition ``q_lambda**2 <= EV * (2 * threshold - 1) * m``,
    where ``m`` counts the penalized coordinates. The largest penalty is
    always kept.
    """
    if data.n < 4:
        raise ValueError("stability selection needs at least 4 rows")
    config = config or FitConfig()
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if lambdas is None:
        lambdas = default_lambda_grid(data, mode, config)
    lambdas = np.asarray(lambdas, dtype=float)
    half = data.n // 2
    counts = np.zeros((lambdas.size, data.q * (data.q + 1) // 2, data.p + 1))
    keep_at = None
    if retain_lambda is not None:
        keep_at = int(np.argmin(np.abs(lambdas - retain_lambda)))
    retained = []
    skipped = 0
    union_sizes = np.zeros(lambdas.size)
    penalized = ThetaParams.zeros(data.q, data.p).penalized_mask()
    for _ in range(n_subsamples):
        rows = np.sort(rng.choice(data.n, half, replace=False))
        path = fit_path(data.subset(rows), lambdas, mode, config, skip_degenerate=True)
        if path[0].skipped_nodes:
            skipped += len(path[0].skipped_nodes)
        union = np.zeros(penalized.shape, dtype=bool)
        for i, res in enumerate(path):
            nonzero = res.theta_hat.coef != 0
            counts[i] += nonzero
            union |= nonzero & penalized
            union_sizes[i] += union.sum()
        if keep_at is not None:
            retained.append(path[keep_at].theta_hat)
    if skipped:
        log.warning("%d degenerate node fits were recorded as all-zero", skipped)
    freq = counts / n_subsamples
    q_lambda = union_sizes / n_subsamples
    n_used = lambdas.size
    if error_control is not None:
        if not 0.5 < threshold <= 1.0:
            raise ValueError("threshold must lie in (0.5, 1]")
        bound = np.sqrt(error_control * (2 * threshold - 1) * penalized.sum())
        n_used = max(1, int(np.sum(q_lambda <= bound)))  # q_lambda is non-decreasing
    best = np.argmax(freq[:n_used], axis=0)
    return StabilitySummary(
        lambdas=lambdas,
        freq=freq,
        fstar=freq[:n_used].max(axis=0),
        argmax_lambda=lambdas[best],
        q=data.q,
        p=data.p,
        n_subsamples=n_subsamples,
        subsample_fraction=half / data.n,
        n_skipped=skipped,
        retained=tuple(retained),
        retained_lambda=None if keep_at is None else float(lambdas[keep_at]),
        n_used=n_used,
        q_lambda=q_lambda,
    )


def rank_edges(summary: StabilitySummary, l: int, groups=None) -> list[tuple[int, int, float]]:
    """Node pairs ``j < k`` ranked by ``f*`` for covariate slot ``l`` (0 = main effect).

    ``groups`` optionally labels each node; only pairs from different groups
    are then returned.
    """
    if not 0 <= l <= summary.p:
        raise IndexError(f"covariate slot {l} out of range for p={summary.p}")
    rows, cols = np.triu_indices(summary.q)
    out = []
    for r, (j, k) in enumerate(zip(rows, cols)):
        if j == k:
            continue
        if groups is not None and groups[j] == groups[k]:
            continue
        out.append((int(j), int(k), float(summary.fstar[r, l])))
    out.sort(key=lambda t: (-t[2], t[0], t[1]))
    return out


@dataclass(frozen=True)
class HubRanking:
    """Covariate-specific degrees per subsample and each node's median rank.

    ``order`` lists ``(node, median_rank)`` by ascending median rank.
    """

    l: int
    degrees: np.ndarray
    median_rank: np.ndarray
    order: tuple


def hub_ranking(per_subsample_fits: Sequence, l: int) -> HubRanking:
    """Rank nodes by how many partners couple to them through covariate slot ``l``.

    Rank 1 is the highest degree; ties share their average rank.
    """
    thetas = [_theta(f) for f in per_subsample_fits]
    if not thetas:
        raise ValueError("no fits supplied")
    q = thetas[0].q
    if not 0 <= l <= thetas[0].p:
        raise IndexError(f"covariate slot {l} out of range for p={thetas[0].p}")
    off = ~np.eye(q, dtype=bool)
    degrees = np.array([((t.dense()[:, :, l] != 0) & off).sum(axis=1) for t in thetas])
    ranks = np.array([rankdata(-d, method="average") for d in degrees])
    med = np.median(ranks, axis=0)
    order = np.argsort(med, kind="stable")
    return HubRanking(l, degrees, med, tuple((int(j), float(med[j])) for j in order))


def simulate_roc(
    sim: SimConfig,
    mode: str = "separate-max",
    config: FitConfig | None = None,
    n_lambda: int = 50,
    ratio: float = 0.01,
    scope: str = "all",
    validation: bool = False,
) -> dict:
    """Simulate one dataset, fit the default path and score it.

    Returns a dict with ``curve``, ``auc``, ``lambdas``, ``truth``, ``path``
    and, when ``validation`` is set, the validation-selected ``lam_star`` and
    its ``star`` ROC point computed on a fresh dataset of the same size.
    """
    data, truth = simulate_dataset(sim)
    lambdas = default_lambda_grid(data, mode, config, n_lambda, ratio)
    path = fit_path(data, lambdas, mode, config)
    curve = roc_curve(path, truth, scope)
    out = {"curve": curve, "auc": auc(curve), "lambdas": lambdas, "truth": truth, "path": path}
    if validation:
        v_rng = np.random.default_rng(np.random.SeedSequence(sim.seed).spawn(6)[5])
        valid = sample_dataset(truth, sim.n, v_rng, sim.gibbs_sweeps)
        scores = [pseudo_neg_loglik(res.theta_hat, valid) for res in path]
        best = int(np.argmin(scores))
        out["lam_star"] = float(lambdas[best])
        out["star"] = curve.points[best]
    return out
