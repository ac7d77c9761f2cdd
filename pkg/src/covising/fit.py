"""L1-penalized pseudo-likelihood fitting: separate node-wise and joint regressions.

Both routes reduce to one penalized logistic regression solved in
:mod:`covising._cd`. Node intercepts are never penalized. With
``standardize=True`` covariate columns are divided by their standard deviation
before fitting; estimates are mapped back, so the fit is equivalent to a lasso
on the raw scale whose covariate ``l`` carries penalty weight ``sd_l``. That
weight vector is stored as ``FitResult.penalty_factor``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import logit

from ._cd import LogisticProblem, kkt_violation
from .model import Dataset, DimensionError, ThetaParams, _pair_lookup, node_design

__all__ = [
    "FitConfig",
    "FitResult",
    "NodeFit",
    "NodeEstimates",
    "DegenerateResponseError",
    "soft_threshold",
    "symmetrize",
    "fit_node",
    "lambda_max_node",
    "lambda_max",
    "default_lambda_grid",
    "fit_separate",
    "fit_joint",
    "fit",
    "fit_path",
    "kkt_residual",
    "penalized_objective",
]

MODES = ("separate-max", "separate-min", "joint")


class DegenerateResponseError(ValueError):
    """A response column is constant, so its unpenalized intercept has no finite optimum."""

    def __init__(self, node: int, value: float):
        self.node = node
        self.value = value
        super().__init__(
            f"response column for node {node} is constant ({value:g}); its intercept is unbounded"
        )


@dataclass(frozen=True)
class FitConfig:
    tol: float = 1e-6
    max_passes: int = 10_000
    standardize: bool = True
    symmetrize: str = "separate-max"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be at least 1")
        if self.symmetrize not in ("separate-max", "separate-min"):
            raise ValueError(f"unknown symmetrization rule {self.symmetrize!r}")


@dataclass(frozen=True)
class NodeFit:
    """Solution of one node regression; ``coef`` is the ``(q, p + 1)`` node subvector."""

    node: int
    coef: np.ndarray
    lam: float
    objective: float
    kkt_residual: float
    passes: int
    converged: bool
    objective_trace: tuple = ()


@dataclass(frozen=True)
class NodeEstimates:
    """Raw per-node solutions before symmetrization; ``raw[j]`` is node ``j``'s subvector."""

    raw: np.ndarray
    fits: tuple = ()

    @property
    def q(self) -> int:
        return self.raw.shape[0]


@dataclass(frozen=True)
class FitResult:
    theta_hat: ThetaParams
    lam: float
    objective: float
    kkt_residual: float
    passes: int
    converged: bool
    mode: str
    penalty_factor: np.ndarray
    objective_trace: tuple = ()
    node_estimates: NodeEstimates | None = field(default=None, repr=False)
    skipped_nodes: tuple = ()

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.theta_hat.coef[self.theta_hat.penalized_mask()]))


def soft_threshold(z, gamma):
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("threshold must be non-negative")
    return np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)


def symmetrize(raw, rule: str = "separate-max") -> ThetaParams:
    """Combine the two estimates of each shared coefficient by magnitude.

    ``raw[j, k, l]`` comes from regression ``j``. ``separate-max`` keeps the
    larger magnitude, ``separate-min`` the smaller. Equal magnitudes keep the
    value from the regression with the smaller node index.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 3 or raw.shape[0] != raw.shape[1]:
        raise DimensionError(f"expected (q, q, p+1) raw estimates, got {raw.shape}")
    lower = np.triu(np.ones(raw.shape[:2], dtype=bool), 1)[:, :, None]
    a = raw  # regression j's value at [j, k]
    b = raw.transpose(1, 0, 2)  # regression k's value at [j, k]
    if rule == "separate-max":
        take_b = np.abs(b) > np.abs(a)
    elif rule == "separate-min":
        take_b = np.abs(b) < np.abs(a)
    else:
        raise ValueError(f"unknown symmetrization rule {rule!r}")
    upper = np.where(take_b, b, a)
    out = np.where(lower, upper, 0.0)
    out = out + out.transpose(1, 0, 2)
    idx = np.arange(raw.shape[0])
    out[idx, idx] = raw[idx, idx]
    return ThetaParams.from_dense(out)


def _mode(mode: str, config: FitConfig) -> str:
    if mode == "separate":
        return config.symmetrize
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES + ('separate',)}, got {mode!r}")
    return mode


def _scales(X, standardize: bool) -> np.ndarray:
    if not standardize or X.shape[1] == 0:
        return np.ones(X.shape[1])
    sd = X.std(axis=0)
    return np.where(sd > 0, sd, 1.0)


def _check_response(Y, nodes):
    for j in nodes:
        col = Y[:, j]
        if np.all(col == col[0]):
            raise DegenerateResponseError(j, float(col[0]))


class _Prepared:
    """Scaled covariates and the factor mapping internal coefficients to raw ones."""

    def __init__(self, data: Dataset, config: FitConfig):
        self.data = data
        self.scales = _scales(data.X, config.standardize)
        self.Xs = data.X / self.scales
        self.penalty_factor = np.concatenate([[1.0], self.scales])

    def to_raw(self, coef):
        return np.asarray(coef) / self.penalty_factor

    def to_internal(self, coef):
        return np.asarray(coef) * self.penalty_factor


def _node_problem(prep: _Prepared, j: int) -> LogisticProblem:
    data = prep.data
    unpen = np.zeros(data.q * (data.p + 1), dtype=bool)
    unpen[j * (data.p + 1)] = True
    Z = node_design(prep.Xs, data.Y, j)
    return LogisticProblem(Z, data.Y[:, j], 1.0 / data.n, unpen)


def _joint_design(X, Y) -> sp.csc_matrix:
    n, p = X.shape
    q = Y.shape[1]
    lookup = _pair_lookup(q)
    cols_of_node = (lookup[:, :, None] * (p + 1) + np.arange(p + 1)).reshape(q, -1)
    shape = (n, (q * (q + 1) // 2) * (p + 1))
    blocks = []
    for j in range(q):
        D = sp.coo_matrix(node_design(X, Y, j))
        blocks.append(sp.csc_matrix((D.data, (D.row, cols_of_node[j][D.col])), shape=shape))
    return sp.vstack(blocks).tocsc()


def _joint_problem(prep: _Prepared) -> LogisticProblem:
    data = prep.data
    q, p = data.q, data.p
    theta0 = ThetaParams.zeros(q, p)
    unpen = ~theta0.penalized_mask().ravel()
    return LogisticProblem(_joint_design(prep.Xs, data.Y), data.Y.T.ravel(), 1.0 / data.n, unpen)


def _node_start(data: Dataset, j: int) -> np.ndarray:
    beta = np.zeros(data.q * (data.p + 1))
    beta[j * (data.p + 1)] = logit(data.Y[:, j].mean())
    return beta


def _joint_start(data: Dataset) -> np.ndarray:
    coef = np.zeros((data.q * (data.q + 1) // 2, data.p + 1))
    lookup = _pair_lookup(data.q)
    for j in range(data.q):
        coef[lookup[j, j], 0] = logit(data.Y[:, j].mean())
    return coef.ravel()


def _lambda_max_problem(problem: LogisticProblem, start) -> float:
    grad = problem.gradient(start)
    pen = ~problem.unpenalized
    return float(np.max(np.abs(grad[pen]))) if pen.any() else 0.0


def lambda_max_node(data: Dataset, j: int, config: FitConfig | None = None) -> float:
    """Smallest penalty at which node ``j``'s penalized coefficients are all zero."""
    config = config or FitConfig()
    _check_response(data.Y, [j])
    prep = _Prepared(data, config)
    return _lambda_max_problem(_node_problem(prep, j), _node_start(data, j))


def lambda_max(data: Dataset, mode: str = "joint", config: FitConfig | None = None) -> float:
    """Penalty level giving an all-zero penalized fit for the whole model under ``mode``."""
    config = config or FitConfig()
    mode = _mode(mode, config)
    _check_response(data.Y, range(data.q))
    prep = _Prepared(data, config)
    if mode == "joint":
        return _lambda_max_problem(_joint_problem(prep), _joint_start(data))
    return max(
        _lambda_max_problem(_node_problem(prep, j), _node_start(data, j)) for j in range(data.q)
    )


def default_lambda_grid(
    data: Dataset,
    mode: str = "joint",
    config: FitConfig | None = None,
    n_lambda: int = 50,
    ratio: float = 0.01,
) -> np.ndarray:
    """Log-spaced grid from ``lambda_max`` down to ``ratio * lambda_max``."""
    lmax = lambda_max(data, mode, config)
    return np.geomspace(lmax, ratio * lmax, n_lambda)


def _solve_node(prep, problem, j, lam, config, start) -> NodeFit:
    out = problem.solve(lam, start, config.tol, config.max_passes)
    coef = prep.to_raw(out.beta.reshape(prep.data.q, prep.data.p + 1))
    return NodeFit(
        j, coef, float(lam), out.objective, out.kkt, out.passes, out.converged, tuple(out.trace)
    )


def fit_node(
    data: Dataset, j: int, lam: float, config: FitConfig | None = None, init=None
) -> NodeFit:
    """Solve ``min l_j(theta_j) + lam * ||theta_j without intercept||_1`` for one node.

    ``init`` is an optional raw-scale ``(q, p + 1)`` warm start.
    """
    config = config or FitConfig()
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    _check_response(data.Y, [j])
    prep = _Prepared(data, config)
    start = _node_start(data, j) if init is None else prep.to_internal(init).ravel()
    return _solve_node(prep, _node_problem(prep, j), j, lam, config, start)


def _assemble_separate(prep, fits, lam, rule, skipped=()) -> tuple[FitResult, NodeEstimates]:
    raw = np.stack([f.coef for f in fits])
    estimates = NodeEstimates(raw, tuple(fits))
    result = FitResult(
        theta_hat=symmetrize(raw, rule),
        lam=float(lam),
        objective=float(sum(f.objective for f in fits)),
        kkt_residual=float(max(f.kkt_residual for f in fits)),
        passes=int(sum(f.passes for f in fits)),
        converged=all(f.converged for f in fits),
        mode=rule,
        penalty_factor=prep.penalty_factor,
        objective_trace=tuple(f.objective_trace for f in fits),
        node_estimates=estimates,
        skipped_nodes=tuple(skipped),
    )
    return result, estimates


def fit_separate(
    data: Dataset,
    lam: float,
    config: FitConfig | None = None,
    init: NodeEstimates | None = None,
    rule: str | None = None,
) -> tuple[FitResult, NodeEstimates]:
    """Fit all ``q`` node regressions and symmetrize by ``rule`` (default ``config.symmetrize``)."""
    config = config or FitConfig()
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    rule = rule or config.symmetrize
    _check_response(data.Y, range(data.q))
    prep = _Prepared(data, config)
    fits = []
    for j in range(data.q):
        start = _node_start(data, j) if init is None else prep.to_internal(init.raw[j]).ravel()
        fits.append(_solve_node(prep, _node_problem(prep, j), j, lam, config, start))
    return _assemble_separate(prep, fits, lam, rule)


def _joint_result(prep, out, lam) -> FitResult:
    data = prep.data
    coef = prep.to_raw(out.beta.reshape(-1, data.p + 1))
    return FitResult(
        theta_hat=ThetaParams(data.dims, coef),
        lam=float(lam),
        objective=out.objective,
        kkt_residual=out.kkt,
        passes=out.passes,
        converged=out.converged,
        mode="joint",
        penalty_factor=prep.penalty_factor,
        objective_trace=tuple(out.trace),
    )


def fit_joint(
    data: Dataset, lam: float, config: FitConfig | None = None, init: ThetaParams | None = None
) -> FitResult:
    """Minimize ``sum_j l_j(theta) + lam * ||theta without intercepts||_1`` over symmetric theta."""
    config = config or FitConfig()
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    _check_response(data.Y, range(data.q))
    prep = _Prepared(data, config)
    start = _joint_start(data) if init is None else prep.to_internal(init.coef).ravel()
    out = _joint_problem(prep).solve(lam, start, config.tol, config.max_passes)
    return _joint_result(prep, out, lam)


def fit(data: Dataset, lam: float, mode: str = "joint", config: FitConfig | None = None) -> FitResult:
    """Single fit under ``mode`` in ``{'separate-max', 'separate-min', 'joint', 'separate'}``."""
    config = config or FitConfig()
    mode = _mode(mode, config)
    if mode == "joint":
        return fit_joint(data, lam, config)
    return fit_separate(data, lam, config, rule=mode)[0]


def _degenerate_nodes(Y) -> list[int]:
    return [j for j in range(Y.shape[1]) if np.all(Y[:, j] == Y[0, j])]


def fit_path(
    data: Dataset,
    lambdas: Sequence[float],
    mode: str = "joint",
    config: FitConfig | None = None,
    skip_degenerate: bool = False,
) -> list[FitResult]:
    """Fit along a strictly descending penalty grid, warm-starting each point from the last.

    With ``skip_degenerate`` a constant response column does not raise: in the
    separate modes that node's regression is recorded as all-zero, in joint
    mode every path point is the all-zero fit. Skipped nodes are listed in
    ``FitResult.skipped_nodes``.
    """
    config = config or FitConfig()
    mode = _mode(mode, config)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size == 0:
        raise ValueError("lambdas must be a non-empty 1-d sequence")
    if np.any(lambdas < 0) or np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambdas must be non-negative and strictly descending")
    skipped = _degenerate_nodes(data.Y)
    if skipped and not skip_degenerate:
        raise DegenerateResponseError(skipped[0], float(data.Y[0, skipped[0]]))
    prep = _Prepared(data, config)
    results = []
    if mode == "joint":
        if skipped:
            zero = ThetaParams.zeros(data.q, data.p)
            return [
                FitResult(zero, float(lam), np.nan, np.nan, 0, False, mode,
                          prep.penalty_factor, skipped_nodes=tuple(skipped))
                for lam in lambdas
            ]
        problem = _joint_problem(prep)
        beta = _joint_start(data)
        for lam in lambdas:
            out = problem.solve(lam, beta, config.tol, config.max_passes)
            beta = out.beta
            results.append(_joint_result(prep, out, lam))
        return results
    live = [j for j in range(data.q) if j not in skipped]
    problems = {j: _node_problem(prep, j) for j in live}
    starts = {j: _node_start(data, j) for j in live}
    zero_node = np.zeros((data.q, data.p + 1))
    for lam in lambdas:
        fits = []
        for j in range(data.q):
            if j not in problems:
                fits.append(NodeFit(j, zero_node, float(lam), 0.0, 0.0, 0, True))
                continue
            out = problems[j].solve(lam, starts[j], config.tol, config.max_passes)
            starts[j] = out.beta
            coef = prep.to_raw(out.beta.reshape(data.q, data.p + 1))
            fits.append(
                NodeFit(j, coef, float(lam), out.objective, out.kkt, out.passes, out.converged,
                        tuple(out.trace))
            )
        results.append(_assemble_separate(prep, fits, lam, mode, skipped)[0])
    return results


def _raw_node_vectors(theta, q: int) -> np.ndarray:
    if isinstance(theta, ThetaParams):
        return theta.dense()
    if isinstance(theta, NodeEstimates):
        return theta.raw
    if isinstance(theta, FitResult):
        if theta.node_estimates is not None:
            return theta.node_estimates.raw
        return theta.theta_hat.dense()
    raw = np.asarray(theta, dtype=float)
    if raw.ndim != 3 or raw.shape[0] != q:
        raise DimensionError(f"expected (q, q, p+1) node estimates, got {raw.shape}")
    return raw


def _penalty_factor(data: Dataset, penalty_factor):
    pf = np.ones(data.p + 1) if penalty_factor is None else np.asarray(penalty_factor, float)
    if pf.shape != (data.p + 1,):
        raise DimensionError(f"penalty_factor must have length p+1={data.p + 1}")
    return pf


def kkt_residual(
    theta, data: Dataset, lam: float, mode: str = "joint", penalty_factor=None
) -> float:
    """Largest violation of the subgradient optimality conditions at ``theta``.

    For the separate modes ``theta`` may be node estimates (checked per
    regression) or a symmetric :class:`ThetaParams` (its node subvectors are
    checked). ``penalty_factor`` (length ``p + 1``) weights the penalty per
    covariate slot; violations are reported divided by that weight, which
    matches the residual of the equivalent standardized problem.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    pf = _penalty_factor(data, penalty_factor)
    config = FitConfig(standardize=False)
    mode = _mode(mode, config) if mode != "separate" else "separate-max"
    prep = _Prepared(data, config)
    worst = 0.0
    if mode == "joint":
        if not isinstance(theta, ThetaParams):
            theta = theta.theta_hat if isinstance(theta, FitResult) else theta
        problem = _joint_problem(prep)
        beta = theta.coef.ravel()
        weights = np.tile(pf, theta.dims.n_pairs)
        pen = np.where(problem.unpenalized, 0.0, lam * weights)
        v = kkt_violation(problem.gradient(beta), beta, pen) / weights
        return float(v.max())
    raw = _raw_node_vectors(theta, data.q)
    weights = np.tile(pf, data.q)
    for j in range(data.q):
        problem = _node_problem(prep, j)
        beta = raw[j].ravel()
        pen = np.where(problem.unpenalized, 0.0, lam * weights)
        v = kkt_violation(problem.gradient(beta), beta, pen) / weights
        worst = max(worst, float(v.max()))
    return worst


def penalized_objective(
    theta, data: Dataset, lam: float, mode: str = "joint", penalty_factor=None
) -> float:
    """Penalized pseudo-likelihood objective on the raw scale (the quantity each mode minimizes)."""
    pf = _penalty_factor(data, penalty_factor)
    config = FitConfig(standardize=False)
    prep = _Prepared(data, config)
    if mode == "joint":
        theta = theta.theta_hat if isinstance(theta, FitResult) else theta
        problem = _joint_problem(prep)
        beta = theta.coef.ravel()
        pen = np.where(problem.unpenalized, 0.0, lam * np.tile(pf, theta.dims.n_pairs))
        return problem.loss(problem.Z @ beta) + float(pen @ np.abs(beta))
    raw = _raw_node_vectors(theta, data.q)
    total = 0.0
    for j in range(data.q):
        problem = _node_problem(prep, j)
        beta = raw[j].ravel()
        pen = np.where(problem.unpenalized, 0.0, lam * np.tile(pf, data.q))
        total += problem.loss(problem.Z @ beta) + float(pen @ np.abs(beta))
    return total
