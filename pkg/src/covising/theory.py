"""Numerical checks of the model-selection consistency conditions.

Information matrices are indexed by the flattened node subvector (``k``-major,
see :mod:`covising.model`), so the intercept of node ``j`` sits at
``j * (p + 1)``. Curvature is reported in the positive semidefinite
orientation: ``I = E[p_j (1 - p_j) z z^T]`` with ``z`` the node feature vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .model import Dataset, DimensionError, ThetaParams, _node_vector, node_design
from .simulate import exact_sample, gibbs_sample

__all__ = [
    "InfoMatrices",
    "AssumptionCheck",
    "TheoremConditions",
    "AssumptionReport",
    "feature_vector",
    "empirical_info",
    "population_info_mc",
    "node_support",
    "check_assumptions",
    "theorem_conditions",
    "assumption_report",
    "sign_consistent",
]

EXACT_SAMPLING_MAX_Q = 12


@dataclass(frozen=True)
class InfoMatrices:
    node: int
    I: np.ndarray
    U: np.ndarray
    source: str
    n: int
    I_se: np.ndarray | None = None
    U_se: np.ndarray | None = None


def feature_vector(x, y, j: int) -> np.ndarray:
    """Node ``j``'s regression features for one subject, length ``q (p + 1)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1:
        raise DimensionError("feature_vector takes one covariate vector and one response vector")
    return node_design(x[None, :], y[None, :], j)[0]


def _weighted_moments(Z, weight):
    m = Z.shape[0]
    Zw = Z * weight[:, None]
    first = Zw.T @ Z / m
    Z2 = Z * Z
    second = (Z2 * (weight * weight)[:, None]).T @ Z2 / m
    return first, second


def empirical_info(data: Dataset, theta, j: int) -> InfoMatrices:
    """Sample information ``(1/n) sum p(1-p) z z^T`` and second moment ``(1/n) sum z z^T``.

    The information matrix equals the Hessian of the node's mean negative
    conditional log-likelihood at ``theta``.
    """
    vec = _node_vector(theta, j, data.q, data.p)
    Z = node_design(data.X, data.Y, j)
    prob = expit(Z @ vec.ravel())
    w = prob * (1.0 - prob)
    I = (Z * w[:, None]).T @ Z / data.n
    U = Z.T @ Z / data.n
    return InfoMatrices(j, (I + I.T) / 2, (U + U.T) / 2, "empirical", data.n)


def _standard_normal(rng, m, p):
    return rng.standard_normal((m, p))


def population_info_mc(
    theta_star: ThetaParams,
    j: int,
    n_mc: int = 100_000,
    rng=None,
    covariate_sampler: Callable | None = None,
    chunk: int = 50_000,
    gibbs_sweeps: int = 500,
) -> InfoMatrices:
    """Monte Carlo estimate of the population ``I*`` and ``U*`` for node ``j``.

    ``covariate_sampler(rng, m, p)`` returns an ``(m, p)`` covariate draw
    (default i.i.d. standard normal). Responses are sampled exactly for
    ``q <= 12`` and by Gibbs sampling otherwise. Entrywise Monte Carlo
    standard errors are returned in ``I_se`` and ``U_se``.
    """
    if hasattr(theta_star, "theta_star"):
        theta_star = theta_star.theta_star
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    sampler = covariate_sampler or _standard_normal
    q, p = theta_star.q, theta_star.p
    d = q * (p + 1)
    sums = {k: np.zeros((d, d)) for k in ("I", "I2", "U", "U2")}
    vec = theta_star.node(j).ravel()
    done = 0
    while done < n_mc:
        m = min(chunk, n_mc - done)
        X = np.asarray(sampler(rng, m, p), dtype=float).reshape(m, p)
        if q <= EXACT_SAMPLING_MAX_Q:
            Y = exact_sample(theta_star, X, rng)
        else:
            Y = gibbs_sample(theta_star, X, gibbs_sweeps, rng)
        Z = node_design(X, Y, j)
        prob = expit(Z @ vec)
        for key, w in (("I", prob * (1 - prob)), ("U", np.ones(m))):
            first, second = _weighted_moments(Z, w)
            sums[key] += first * m
            sums[key + "2"] += second * m
        done += m
    out = {}
    for key in ("I", "U"):
        mean = sums[key] / n_mc
        var = np.maximum(sums[key + "2"] / n_mc - mean**2, 0.0)
        out[key] = ((mean + mean.T) / 2, np.sqrt(var * n_mc / max(n_mc - 1, 1) / n_mc))
    return InfoMatrices(j, out["I"][0], out["U"][0], "population-mc", n_mc, out["I"][1], out["U"][1])


def node_support(theta: ThetaParams, j: int) -> np.ndarray:
    """Flattened indices of node ``j``'s nonzero penalized coefficients (intercept excluded)."""
    vec = theta.node(j).ravel().copy()
    vec[j * (theta.p + 1)] = 0.0
    return np.flatnonzero(vec)


@dataclass(frozen=True)
class AssumptionCheck:
    incoherence: float
    alpha_slack: float
    delta_min: float
    delta_max: float
    singular: bool
    vacuous: bool

    @property
    def a1(self) -> bool:
        return not self.singular and self.alpha_slack > 0

    @property
    def a2(self) -> bool:
        return not self.singular and (self.vacuous or self.delta_min > 0)


def check_assumptions(info: InfoMatrices, support) -> AssumptionCheck:
    """Incoherence and eigenvalue conditions for the active index set ``support``.

    ``incoherence`` is ``max_i sum_j |(I_{S^c S} I_{SS}^{-1})_{ij}|`` and
    ``alpha_slack = 1 - incoherence``. An empty ``support`` or complement makes
    the incoherence norm zero. A singular ``I_SS`` is flagged, not raised.
    """
    S = np.asarray(sorted(set(int(s) for s in support)), dtype=int)
    d = info.I.shape[0]
    Sc = np.setdiff1d(np.arange(d), S)
    delta_max = float(np.linalg.eigvalsh(info.U)[-1])
    if S.size == 0:
        return AssumptionCheck(0.0, 1.0, float("nan"), delta_max, False, True)
    I_SS = info.I[np.ix_(S, S)]
    eig = np.linalg.eigvalsh(I_SS)
    delta_min = float(eig[0])
    if delta_min <= 1e-12 * max(1.0, abs(eig[-1])):
        return AssumptionCheck(float("inf"), float("-inf"), delta_min, delta_max, True, False)
    if Sc.size == 0:
        return AssumptionCheck(0.0, 1.0, delta_min, delta_max, False, False)
    M = np.linalg.solve(I_SS, info.I[np.ix_(S, Sc)]).T  # = I_{S^c S} I_SS^{-1}, I symmetric
    norm = float(np.abs(M).sum(axis=1).max())
    return AssumptionCheck(norm, 1.0 - norm, delta_min, delta_max, False, False)


@dataclass(frozen=True)
class TheoremConditions:
    m_rhs: float
    lambda_rhs: float
    n_rhs: float
    m_ok: bool
    lambda_ok: bool
    n_ok: bool
    l2_bound: float
    sign_threshold: float

    @property
    def all_ok(self) -> bool:
        return self.m_ok and self.lambda_ok and self.n_ok


def theorem_conditions(
    lam: float,
    n: float,
    M: float,
    d: int,
    p: int,
    q: int,
    C: float,
    delta: float,
    delta_min: float = float("nan"),
) -> TheoremConditions:
    """Evaluate the rate conditions on ``(M, lam, n)`` and the resulting error bounds.

    Conditions (all inclusive):
    ``M >= (C lam^2 n)^(1/(1+delta))``,
    ``lam >= C M sqrt((log p + log q) / n)``,
    ``n >= C M^2 d^3 (log p + log q)``.
    Bounds: ``l2 <= 5 lam sqrt(d) / delta_min``; signs are recovered for
    coefficients of magnitude at least ``10 lam sqrt(d) / delta_min``.
    """
    for name, val in (("lam", lam), ("n", n), ("M", M), ("p", p), ("q", q), ("C", C), ("delta", delta)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val!r}")
    if d < 0:
        raise ValueError("d must be non-negative")
    logs = np.log(p) + np.log(q)
    m_rhs = (C * lam**2 * n) ** (1.0 / (1.0 + delta))
    lambda_rhs = C * M * np.sqrt(logs / n)
    n_rhs = C * M**2 * d**3 * logs
    l2 = 5.0 * lam * np.sqrt(d) / delta_min
    return TheoremConditions(
        float(m_rhs), float(lambda_rhs), float(n_rhs),
        bool(M >= m_rhs), bool(lam >= lambda_rhs), bool(n >= n_rhs),
        float(l2), float(2.0 * l2),
    )


@dataclass(frozen=True)
class AssumptionReport:
    node: int
    support: tuple
    incoherence: float
    alpha_slack: float
    delta_min: float
    delta_max: float
    d: int
    singular: bool
    vacuous: bool
    conditions: TheoremConditions | None = None
    l2_bound: float = float("nan")
    theta_min_threshold: float = float("nan")

    def as_dict(self) -> dict:
        out = {
            "node": self.node,
            "support": list(self.support),
            "incoherence": self.incoherence,
            "alpha_slack": self.alpha_slack,
            "delta_min": self.delta_min,
            "delta_max": self.delta_max,
            "d": self.d,
            "singular": self.singular,
            "vacuous": self.vacuous,
            "l2_bound": self.l2_bound,
            "theta_min_threshold": self.theta_min_threshold,
        }
        if self.conditions is not None:
            c = self.conditions
            out["conditions"] = {
                "condition_M": c.m_ok, "condition_lambda": c.lambda_ok, "condition_n": c.n_ok,
                "M_rhs": c.m_rhs, "lambda_rhs": c.lambda_rhs, "n_rhs": c.n_rhs,
            }
        return out


def assumption_report(
    theta_star: ThetaParams,
    info: InfoMatrices,
    lam: float | None = None,
    n: float | None = None,
    M: float | None = None,
    C: float | None = None,
    delta: float | None = None,
) -> AssumptionReport:
    """Assumption and rate-condition summary for node ``info.node`` of ``theta_star``.

    The intercept slot is dropped from the information matrices before the
    check, so the active block is the node's true penalized support and its
    complement is every other penalized coordinate. ``d`` is the largest
    penalized support over all nodes. Rate conditions are evaluated only when
    ``lam, n, M, C, delta`` are all given.
    """
    j = info.node
    support = node_support(theta_star, j)
    keep = np.delete(np.arange(info.I.shape[0]), j * (theta_star.p + 1))
    reduced = InfoMatrices(j, info.I[np.ix_(keep, keep)], info.U[np.ix_(keep, keep)], info.source, info.n)
    chk = check_assumptions(reduced, np.searchsorted(keep, support))
    d = max(node_support(theta_star, k).size for k in range(theta_star.q))
    cond = None
    l2 = thr = float("nan")
    if None not in (lam, n, M, C, delta):
        cond = theorem_conditions(lam, n, M, d, theta_star.p, theta_star.q, C, delta, chk.delta_min)
        l2, thr = cond.l2_bound, cond.sign_threshold
    elif lam is not None:
        l2 = 5.0 * lam * np.sqrt(d) / chk.delta_min
        thr = 2.0 * l2
    return AssumptionReport(
        node=j,
        support=tuple(int(s) for s in support),
        incoherence=chk.incoherence,
        alpha_slack=chk.alpha_slack,
        delta_min=chk.delta_min,
        delta_max=chk.delta_max,
        d=int(d),
        singular=chk.singular,
        vacuous=support.size == 0,
        conditions=cond,
        l2_bound=float(l2),
        theta_min_threshold=float(thr),
    )


def sign_consistent(theta_hat: ThetaParams, theta_star: ThetaParams) -> bool:
    """True when every penalized coefficient has the true sign (zeros included)."""
    mask = theta_star.penalized_mask()
    return bool(np.array_equal(np.sign(theta_hat.coef[mask]), np.sign(theta_star.coef[mask])))
