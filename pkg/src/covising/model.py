"""Parameters, likelihoods and exact probabilities of the covariate-dependent Ising model.

Nodes are indexed ``0..q-1`` and covariates ``1..p``; covariate slot ``0`` is the
constant term. The coupling between nodes ``j`` and ``k`` for a subject with
covariates ``x`` is ``theta[j, k, 0] + theta[j, k, 1:] @ x`` and is symmetric in
``(j, k)``. The diagonal ``(j, j)`` holds the node's own main effect.

A node subvector is the ``(q, p + 1)`` slice of all coefficients entering node
``j``'s logistic regression. Its flattened form is ``k``-major, so coordinate
``k * (p + 1) + l`` multiplies the feature ``x_l * y_k`` (``x_0 = 1`` and
``y_j = 1``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

__all__ = [
    "ModelDims",
    "ThetaParams",
    "Dataset",
    "DimensionError",
    "num_parameters",
    "pair_index",
    "edge_strength",
    "strength_matrix",
    "conditional_logit",
    "conditional_prob",
    "node_design",
    "neg_cond_loglik",
    "grad_neg_cond_loglik",
    "pseudo_neg_loglik",
    "exact_pmf",
    "log1pexp",
]

MAX_ENUM_Q = 20


class DimensionError(ValueError):
    """Raised when array shapes disagree with the model dimensions."""


@dataclass(frozen=True)
class ModelDims:
    q: int
    p: int

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be a positive integer, got {self.q!r}")
        if int(self.p) != self.p or self.p < 0:
            raise ValueError(f"p must be a non-negative integer, got {self.p!r}")

    @property
    def n_pairs(self) -> int:
        return self.q * (self.q + 1) // 2

    @property
    def node_size(self) -> int:
        return self.q * (self.p + 1)


def num_parameters(dims, p: int | None = None) -> int:
    """Total number of free coefficients, ``(p + 1) q (q + 1) / 2``.

    Accepts a :class:`ModelDims` or the two integers ``q, p``.
    """
    if p is not None:
        dims = ModelDims(dims, p)
    return (dims.p + 1) * dims.n_pairs


def pair_index(j: int, k: int, q: int) -> int:
    """Row of the packed storage holding the unordered pair ``{j, k}``.

    Pairs are packed in row-major upper-triangular order:
    ``(0, 0), (0, 1), ..., (0, q-1), (1, 1), ...``.
    """
    if j > k:
        j, k = k, j
    if j < 0 or k >= q:
        raise IndexError(f"node pair ({j}, {k}) out of range for q={q}")
    return j * q - j * (j - 1) // 2 + (k - j)


def _pair_lookup(q: int) -> np.ndarray:
    rows, cols = np.triu_indices(q)
    lookup = np.empty((q, q), dtype=np.intp)
    lookup[rows, cols] = np.arange(rows.size)
    lookup[cols, rows] = np.arange(rows.size)
    return lookup


@dataclass(frozen=True, eq=False)
class ThetaParams:
    """Symmetric coefficient tensor stored once per unordered node pair.

    ``coef`` has shape ``(q (q + 1) / 2, p + 1)``; use :meth:`dense` for the
    ``(q, q, p + 1)`` symmetric view and :meth:`get` for single entries.
    """

    dims: ModelDims
    coef: np.ndarray
    _dense: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        coef = np.array(self.coef, dtype=float)
        expected = (self.dims.n_pairs, self.dims.p + 1)
        if coef.shape != expected:
            raise DimensionError(f"coef has shape {coef.shape}, expected {expected}")
        if not np.all(np.isfinite(coef)):
            raise ValueError("coefficients must be finite")
        coef.setflags(write=False)
        object.__setattr__(self, "coef", coef)
        dense = coef[_pair_lookup(self.dims.q)]
        dense.setflags(write=False)
        object.__setattr__(self, "_dense", dense)

    @classmethod
    def zeros(cls, q: int, p: int) -> "ThetaParams":
        dims = ModelDims(q, p)
        return cls(dims, np.zeros((dims.n_pairs, p + 1)))

    @classmethod
    def from_dense(cls, arr, atol: float = 0.0) -> "ThetaParams":
        """Build from a ``(q, q, p + 1)`` array; it must be symmetric within ``atol``."""
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 3 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"expected a (q, q, p+1) array, got shape {arr.shape}")
        if not np.allclose(arr, arr.transpose(1, 0, 2), rtol=0.0, atol=atol):
            raise ValueError("coefficient array is not symmetric in its node indices")
        q = arr.shape[0]
        rows, cols = np.triu_indices(q)
        return cls(ModelDims(q, arr.shape[2] - 1), arr[rows, cols])

    @property
    def q(self) -> int:
        return self.dims.q

    @property
    def p(self) -> int:
        return self.dims.p

    def dense(self) -> np.ndarray:
        """Read-only ``(q, q, p + 1)`` view with ``dense()[j, k] == dense()[k, j]``."""
        return self._dense

    def get(self, j: int, k: int, l: int) -> float:
        return float(self.coef[pair_index(j, k, self.q), l])

    def node(self, j: int) -> np.ndarray:
        """Node subvector of regression ``j`` as a ``(q, p + 1)`` array."""
        return self._dense[j]

    def penalized_mask(self) -> np.ndarray:
        """Boolean mask over ``coef``; False only at the node intercepts."""
        mask = np.ones(self.coef.shape, dtype=bool)
        diag = [pair_index(j, j, self.q) for j in range(self.q)]
        mask[diag, 0] = False
        return mask

    def support(self) -> set[tuple[int, int, int]]:
        """Nonzero coordinates ``(j, k, l)`` with ``j <= k``."""
        rows, cols = np.triu_indices(self.q)
        return {
            (int(rows[r]), int(cols[r]), int(l)) for r, l in zip(*np.nonzero(self.coef))
        }

    def __eq__(self, other):
        if not isinstance(other, ThetaParams):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.coef, other.coef)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariates ``X`` (n, p) paired with binary responses ``Y`` (n, q)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        Y = np.array(self.Y)
        if X.ndim == 1 and X.size == 0 and Y.ndim == 2:
            X = X.reshape(Y.shape[0], 0)
        if X.ndim != 2 or Y.ndim != 2:
            raise DimensionError("X and Y must both be 2-d arrays")
        if X.shape[0] != Y.shape[0]:
            raise DimensionError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        if X.shape[0] < 1:
            raise DimensionError("a dataset needs at least one row")
        if Y.shape[1] < 1:
            raise DimensionError("Y needs at least one column")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        if not np.all((Y == 0) | (Y == 1)):
            raise ValueError("Y entries must be exactly 0 or 1")
        Y = Y.astype(float)
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Y.shape[1]

    @property
    def dims(self) -> ModelDims:
        return ModelDims(self.q, self.p)

    def subset(self, rows) -> "Dataset":
        return Dataset(self.X[rows], self.Y[rows])

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return np.array_equal(self.X, other.X) and np.array_equal(self.Y, other.Y)

    __hash__ = None


def log1pexp(t):
    """Stable ``log(1 + exp(t))``."""
    t = np.asarray(t, dtype=float)
    return np.where(t > 0, t + np.log1p(np.exp(-np.abs(t))), np.log1p(np.exp(np.minimum(t, 0))))


def _augment(x, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p:
        raise DimensionError(f"covariate vector has length {x.shape[-1]}, expected {p}")
    ones = np.ones(x.shape[:-1] + (1,))
    return np.concatenate([ones, x], axis=-1)


def _check_node(j: int, q: int):
    if not 0 <= j < q:
        raise IndexError(f"node {j} out of range for q={q}")


def edge_strength(theta: ThetaParams, x, j: int, k: int) -> float:
    """Coupling ``theta_jk0 + theta_jk @ x`` between nodes ``j`` and ``k``."""
    _check_node(j, theta.q)
    _check_node(k, theta.q)
    return float(theta.coef[pair_index(j, k, theta.q)] @ _augment(x, theta.p))


def strength_matrix(theta: ThetaParams, X) -> np.ndarray:
    """All couplings at covariates ``X``; shape ``(q, q)`` or ``(m, q, q)`` for ``X`` (m, p)."""
    return np.einsum("...l,jkl->...jk", _augment(X, theta.p), theta.dense())


def _node_vector(theta, j: int, q: int, p: int) -> np.ndarray:
    if isinstance(theta, ThetaParams):
        if theta.dims != ModelDims(q, p):
            raise DimensionError(f"theta has dims {theta.dims}, data has q={q}, p={p}")
        return theta.node(j)
    vec = np.asarray(theta, dtype=float)
    if vec.size != q * (p + 1):
        raise DimensionError(f"node subvector has {vec.size} entries, expected {q * (p + 1)}")
    return vec.reshape(q, p + 1)


def conditional_logit(theta: ThetaParams, x, y, j: int) -> float:
    """Log-odds of ``y_j = 1`` given the other responses and the covariates."""
    _check_node(j, theta.q)
    y = np.asarray(y, dtype=float)
    if y.shape != (theta.q,):
        raise DimensionError(f"y has shape {y.shape}, expected ({theta.q},)")
    y_tilde = y.copy()
    y_tilde[j] = 1.0
    return float(y_tilde @ theta.node(j) @ _augment(x, theta.p))


def conditional_prob(theta: ThetaParams, x, y, j: int) -> float:
    return float(expit(conditional_logit(theta, x, y, j)))


def node_design(X, Y, j: int) -> np.ndarray:
    """Feature matrix of node ``j``'s regression, shape ``(n, q (p + 1))``.

    Row ``i`` is the flattened outer product of ``(y_1, .., 1, .., y_q)`` (one at
    position ``j``) with ``(1, x_1, .., x_p)``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, p = X.shape
    q = Y.shape[1]
    _check_node(j, q)
    Xt = np.concatenate([np.ones((n, 1)), X], axis=1)
    Yt = Y.copy()
    Yt[:, j] = 1.0
    return (Yt[:, :, None] * Xt[:, None, :]).reshape(n, q * (p + 1))


def _node_eta(theta, data: Dataset, j: int) -> tuple[np.ndarray, np.ndarray]:
    _check_node(j, data.q)
    vec = _node_vector(theta, j, data.q, data.p)
    Z = node_design(data.X, data.Y, j)
    return Z, Z @ vec.ravel()


def neg_cond_loglik(theta, data: Dataset, j: int) -> float:
    """Mean negative conditional log-likelihood of node ``j``.

    ``theta`` is a :class:`ThetaParams` or a node subvector for ``j``.
    """
    _, eta = _node_eta(theta, data, j)
    return float(np.mean(log1pexp(eta) - data.Y[:, j] * eta))


def grad_neg_cond_loglik(theta, data: Dataset, j: int) -> np.ndarray:
    """Gradient of :func:`neg_cond_loglik` over the flattened node subvector."""
    Z, eta = _node_eta(theta, data, j)
    return Z.T @ (expit(eta) - data.Y[:, j]) / data.n


def pseudo_neg_loglik(theta: ThetaParams, data: Dataset) -> float:
    return sum(neg_cond_loglik(theta, data, j) for j in range(data.q))


def exact_pmf(theta: ThetaParams, x) -> tuple[np.ndarray, np.ndarray]:
    """Enumerate ``P(y | x)`` over all ``2**q`` binary vectors.

    Returns ``(states, probs)``: ``states`` is ``(2**q, q)`` in lexicographic
    order with ``y_0`` most significant, ``probs`` the matching probabilities.
    """
    if theta.q > MAX_ENUM_Q:
        raise ValueError(f"exact enumeration needs q <= {MAX_ENUM_Q}, got {theta.q}")
    A = strength_matrix(theta, x)
    states = np.array(list(itertools.product((0, 1), repeat=theta.q)), dtype=float)
    # y_j^2 = y_j, so the diagonal enters once through the quadratic form.
    energy = 0.5 * (np.einsum("si,ij,sj->s", states, A, states) + states @ np.diag(A))
    return states.astype(np.int8), np.exp(energy - logsumexp(energy))
