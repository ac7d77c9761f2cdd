"""Ground-truth generation and sampling for simulation studies.

A simulation draws a scale-free graph, a sparse coefficient tensor supported on
it, standard-normal covariates, and one binary response vector per subject
from the conditional Ising model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import expit

from .model import (
    Dataset,
    DimensionError,
    ModelDims,
    ThetaParams,
    exact_pmf,
    strength_matrix,
)

__all__ = [
    "GraphSpec",
    "SimConfig",
    "GroundTruth",
    "gen_scale_free",
    "gen_theta",
    "gen_covariates",
    "gibbs_sample",
    "exact_sample",
    "sample_dataset",
    "simulate_dataset",
]


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


@dataclass(frozen=True)
class GraphSpec:
    q: int
    edges: frozenset

    def __post_init__(self):
        norm = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop at node {a}")
            if not (0 <= a < self.q and 0 <= b < self.q):
                raise ValueError(f"edge ({a}, {b}) out of range for q={self.q}")
            edge = (min(a, b), max(a, b))
            if edge in norm:
                raise ValueError(f"duplicate edge {edge}")
            norm.add(edge)
        object.__setattr__(self, "edges", frozenset(norm))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.q, self.q), dtype=bool)
        for a, b in self.edges:
            A[a, b] = A[b, a] = True
        return A

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def is_connected(self) -> bool:
        n_comp, _ = connected_components(csr_matrix(self.adjacency()), directed=False)
        return n_comp == 1


@dataclass(frozen=True)
class SimConfig:
    """Settings of one simulated dataset.

    ``p_noise`` appends that many uninformative standard-normal covariates after
    the ``dims.p`` informative ones; the informative part of the data does not
    depend on it.
    """

    dims: ModelDims
    n: int
    n_E: int
    rho: float
    beta: float
    gibbs_sweeps: int = 500
    seed: int = 0
    p_noise: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.gibbs_sweeps < 1:
            raise ValueError("gibbs_sweeps must be at least 1")
        if self.p_noise < 0:
            raise ValueError("p_noise must be non-negative")
        q = self.dims.q
        if not q - 1 <= self.n_E <= q * (q - 1) // 2:
            raise ValueError(f"n_E={self.n_E} outside [{q - 1}, {q * (q - 1) // 2}] for q={q}")


@dataclass(frozen=True)
class GroundTruth:
    theta_star: ThetaParams
    support: frozenset = field(default=None)
    graph: GraphSpec | None = None

    def __post_init__(self):
        actual = frozenset(self.theta_star.support())
        if self.support is None:
            object.__setattr__(self, "support", actual)
        elif frozenset(self.support) != actual:
            raise ValueError("support does not match the nonzeros of theta_star")
        else:
            object.__setattr__(self, "support", frozenset(self.support))

    def penalized_support(self) -> frozenset:
        return frozenset(s for s in self.support if not (s[0] == s[1] and s[2] == 0))


def gen_scale_free(q: int, n_E: int, rng=None) -> GraphSpec:
    """Connected graph with exactly ``n_E`` edges and hub-heavy degrees.

    Grows a preferential-attachment tree (attachment weight ``degree + 1``),
    then adds edges between non-adjacent pairs with weight proportional to the
    product of endpoint degrees until ``n_E`` edges exist.
    """
    if q < 1:
        raise ValueError("q must be positive")
    if not q - 1 <= n_E <= q * (q - 1) // 2:
        raise ValueError(f"n_E={n_E} outside [{q - 1}, {q * (q - 1) // 2}] for q={q}")
    rng = _rng(rng)
    deg = np.zeros(q)
    adj = np.zeros((q, q), dtype=bool)
    for new in range(1, q):
        w = deg[:new] + 1.0
        old = rng.choice(new, p=w / w.sum())
        adj[new, old] = adj[old, new] = True
        deg[new] += 1
        deg[old] += 1
    iu, ju = np.triu_indices(q, 1)
    for _ in range(n_E - (q - 1)):
        free = ~adj[iu, ju]
        w = np.where(free, deg[iu] * deg[ju], 0.0)
        pick = rng.choice(iu.size, p=w / w.sum())
        a, b = iu[pick], ju[pick]
        adj[a, b] = adj[b, a] = True
        deg[a] += 1
        deg[b] += 1
    edges = frozenset((int(a), int(b)) for a, b in zip(*np.nonzero(np.triu(adj, 1))))
    return GraphSpec(q, edges)


def gen_theta(graph: GraphSpec, p: int, rho: float, beta: float, rng=None) -> GroundTruth:
    """Three-valued coefficients on the pairs of ``graph`` and on every node.

    Each coefficient of an edge or node pair is ``+beta`` or ``-beta`` with
    probability ``rho / 2`` each and zero otherwise; node intercepts are always
    ``+-beta``. The uniform draws do not depend on ``beta``, so one seed gives
    the same signs and positions at every signal size.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    if not beta > 0:
        raise ValueError("beta must be positive")
    rng = _rng(rng)
    q = graph.q
    dims = ModelDims(q, p)
    u = rng.random((dims.n_pairs, p + 1))
    rows, cols = np.triu_indices(q)
    rate = np.full(u.shape, float(rho))
    diag = rows == cols
    rate[diag, 0] = 1.0
    values = np.where(u < rate / 2, beta, np.where(u < rate, -beta, 0.0))
    adj = graph.adjacency()
    keep = diag | adj[rows, cols]
    values[~keep] = 0.0
    return GroundTruth(ThetaParams(dims, values), graph=graph)


def gen_covariates(n: int, p: int, rng=None) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    return _rng(rng).standard_normal((n, p))


def gibbs_sample(theta: ThetaParams, x, sweeps: int = 500, rng=None) -> np.ndarray:
    """Systematic-scan Gibbs sampler started from the all-zero state.

    ``x`` is one covariate vector (returns a length-``q`` 0/1 vector) or an
    ``(m, p)`` matrix, in which case ``m`` independent chains run side by side
    and an ``(m, q)`` array is returned.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be at least 1")
    rng = _rng(rng)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != theta.p:
        raise DimensionError(f"covariates have {X.shape[1]} columns, expected {theta.p}")
    A = strength_matrix(theta, X)
    m, q = X.shape[0], theta.q
    diag = np.diagonal(A, axis1=1, axis2=2)
    off = A.copy()
    idx = np.arange(q)
    off[:, idx, idx] = 0.0
    y = np.zeros((m, q))
    for _ in range(sweeps):
        u = rng.random((m, q))
        for j in range(q):
            eta = diag[:, j] + np.einsum("mk,mk->m", off[:, j, :], y)
            y[:, j] = u[:, j] < expit(eta)
    y = y.astype(np.int8)
    return y[0] if single else y


def exact_sample(theta: ThetaParams, X, rng=None, chunk: int = 20_000) -> np.ndarray:
    """Draw one response vector per row of ``X`` exactly, by enumerating the pmf."""
    rng = _rng(rng)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    states, _ = exact_pmf(theta, np.zeros(theta.p))
    S = states.astype(float)
    out = np.empty((X.shape[0], theta.q), dtype=np.int8)
    for start in range(0, X.shape[0], chunk):
        A = strength_matrix(theta, X[start:start + chunk])
        diag = np.diagonal(A, axis1=1, axis2=2)
        energy = 0.5 * (np.einsum("si,mij,sj->ms", S, A, S) + diag @ S.T)
        energy -= energy.max(axis=1, keepdims=True)
        prob = np.exp(energy)
        cdf = np.cumsum(prob, axis=1)
        u = rng.random(cdf.shape[0]) * cdf[:, -1]
        pick = np.minimum((cdf < u[:, None]).sum(axis=1), S.shape[0] - 1)
        out[start:start + chunk] = states[pick]
    return out


def sample_dataset(truth: GroundTruth, n: int, rng=None, sweeps: int = 500) -> Dataset:
    """Fresh covariates and Gibbs-sampled responses from a fixed ground truth."""
    rng = _rng(rng)
    theta = truth.theta_star if isinstance(truth, GroundTruth) else truth
    X = gen_covariates(n, theta.p, rng)
    return Dataset(X, gibbs_sample(theta, X, sweeps, rng))


def simulate_dataset(config: SimConfig) -> tuple[Dataset, GroundTruth]:
    """Draw graph, coefficients, covariates and Gibbs-sampled responses from one seed.

    Independent child streams feed each stage, so changing ``beta`` or
    ``p_noise`` leaves the other stages' draws untouched.
    """
    streams = np.random.SeedSequence(config.seed).spawn(5)
    g_rng, t_rng, x_rng, y_rng, z_rng = (np.random.default_rng(s) for s in streams)
    q, p = config.dims.q, config.dims.p
    graph = gen_scale_free(q, config.n_E, g_rng)
    truth = gen_theta(graph, p, config.rho, config.beta, t_rng)
    X = gen_covariates(config.n, p, x_rng)
    Y = gibbs_sample(truth.theta_star, X, config.gibbs_sweeps, y_rng)
    if config.p_noise:
        X = np.hstack([X, gen_covariates(config.n, config.p_noise, z_rng)])
        padded = np.hstack(
            [truth.theta_star.coef, np.zeros((config.dims.n_pairs, config.p_noise))]
        )
        truth = GroundTruth(ThetaParams(ModelDims(q, p + config.p_noise), padded), graph=graph)
    return Dataset(X, Y), truth
