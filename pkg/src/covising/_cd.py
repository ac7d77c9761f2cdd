"""Penalized logistic regression by proximal Newton with coordinate-descent inner solves.

Minimizes ``scale * sum_i [log(1 + exp(z_i @ b)) - y_i z_i @ b] + sum_c pen_c |b_c|``
for a sparse design ``Z`` in CSC form. Each outer step builds the weighted
quadratic model of the loss at the current iterate, minimizes it (plus the
penalty) by cyclic soft-thresholding, then backtracks along the resulting
direction so the true objective never increases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.special import expit

_W_FLOOR = 1e-8
_ARMIJO = 1e-4


@njit(cache=True)
def _coordinate_pass(coords, indptr, indices, data, w, res, beta, pen, hdiag, scale):
    dmax = 0.0
    for c in coords:
        h = hdiag[c]
        if h <= 0.0:
            continue
        g = 0.0
        for idx in range(indptr[c], indptr[c + 1]):
            r = indices[idx]
            g += w[r] * data[idx] * res[r]
        u = scale * g + h * beta[c]
        if u > pen[c]:
            new = (u - pen[c]) / h
        elif u < -pen[c]:
            new = (u + pen[c]) / h
        else:
            new = 0.0
        d = new - beta[c]
        if d != 0.0:
            beta[c] = new
            for idx in range(indptr[c], indptr[c + 1]):
                res[indices[idx]] -= data[idx] * d
            if abs(d) > dmax:
                dmax = abs(d)
    return dmax


@njit(cache=True)
def _cd_quadratic(indptr, indices, data, w, res, beta, pen, hdiag, scale, tol, max_sweeps):
    """Cyclic CD on the weighted quadratic model, full sweeps alternating with active-set sweeps."""
    m = beta.size
    everything = np.arange(m)
    sweeps = 0
    while sweeps < max_sweeps:
        dmax = _coordinate_pass(everything, indptr, indices, data, w, res, beta, pen, hdiag, scale)
        sweeps += 1
        if dmax < tol:
            break
        active = np.nonzero(beta)[0]
        while sweeps < max_sweeps:
            dmax = _coordinate_pass(active, indptr, indices, data, w, res, beta, pen, hdiag, scale)
            sweeps += 1
            if dmax < tol:
                break
    return sweeps


def log1pexp(t):
    return np.logaddexp(0.0, t)


def kkt_violation(grad, beta, pen):
    """Per-coordinate distance from the subgradient optimality condition."""
    nonzero = beta != 0
    return np.where(
        nonzero,
        np.abs(grad + pen * np.sign(beta)),
        np.maximum(np.abs(grad) - pen, 0.0),
    )


@dataclass
class SolveOutput:
    beta: np.ndarray
    objective: float
    kkt: float
    passes: int
    converged: bool
    trace: list


class LogisticProblem:
    """A fixed design/response pair that can be solved at many penalty levels."""

    def __init__(self, Z, y, scale: float, unpenalized):
        self.Z = sp.csc_matrix(Z, dtype=float)
        self.Z.sort_indices()
        self.ZT = self.Z.T.tocsr()
        self.Z2T = self.Z.multiply(self.Z).T.tocsr()
        self.y = np.asarray(y, dtype=float)
        self.scale = float(scale)
        self.unpenalized = np.asarray(unpenalized, dtype=bool)

    @property
    def n_coef(self) -> int:
        return self.Z.shape[1]

    def penalty(self, lam: float) -> np.ndarray:
        pen = np.full(self.n_coef, float(lam))
        pen[self.unpenalized] = 0.0
        return pen

    def loss(self, eta) -> float:
        return self.scale * float(np.sum(log1pexp(eta) - self.y * eta))

    def gradient(self, beta, eta=None) -> np.ndarray:
        if eta is None:
            eta = self.Z @ beta
        return self.scale * (self.ZT @ (expit(eta) - self.y))

    def objective(self, beta, lam: float) -> float:
        return self.loss(self.Z @ beta) + float(np.sum(self.penalty(lam) * np.abs(beta)))

    def kkt(self, beta, lam: float) -> float:
        v = kkt_violation(self.gradient(beta), beta, self.penalty(lam))
        return float(v.max()) if v.size else 0.0

    def solve(self, lam: float, beta0, tol: float = 1e-6, max_passes: int = 10_000) -> SolveOutput:
        pen = self.penalty(lam)
        beta = np.array(beta0, dtype=float)
        eta = self.Z @ beta
        obj = self.loss(eta) + float(pen @ np.abs(beta))
        trace = [obj]
        passes = 0
        inner_tol = 0.01 * tol
        Z = self.Z
        while True:
            prob = expit(eta)
            w = np.maximum(prob * (1.0 - prob), _W_FLOOR)
            grad = self.scale * (self.ZT @ (prob - self.y))
            kkt = float(kkt_violation(grad, beta, pen).max()) if beta.size else 0.0
            if kkt <= 0.01 * tol:
                return SolveOutput(beta, obj, kkt, passes, True, trace)
            if passes >= max_passes:
                return SolveOutput(beta, obj, kkt, passes, kkt <= 10 * tol, trace)
            res = (self.y - prob) / w
            hdiag = self.scale * (self.Z2T @ w)
            cand = beta.copy()
            passes += _cd_quadratic(
                Z.indptr, Z.indices, Z.data, w, res, cand, pen, hdiag,
                self.scale, inner_tol, max_passes - passes,
            )
            direction = cand - beta
            # predicted decrease of the composite objective; negative for a descent direction
            decrease = float(grad @ direction + pen @ (np.abs(cand) - np.abs(beta)))
            if not np.any(direction) or decrease >= 0.0:
                return SolveOutput(beta, obj, kkt, passes, kkt <= 10 * tol, trace)
            z_dir = Z @ direction
            step = 1.0
            for _ in range(60):
                trial = beta + step * direction
                trial_eta = eta + step * z_dir
                trial_obj = self.loss(trial_eta) + float(pen @ np.abs(trial))
                if trial_obj <= obj + _ARMIJO * step * decrease:
                    break
                step *= 0.5
            else:
                return SolveOutput(beta, obj, kkt, passes, kkt <= 10 * tol, trace)
            change = step * float(np.max(np.abs(direction)))
            beta, eta, obj = trial, trial_eta, trial_obj
            trace.append(obj)
            if change < tol:
                grad = self.gradient(beta, eta)
                kkt = float(kkt_violation(grad, beta, pen).max())
                if kkt <= tol:
                    return SolveOutput(beta, obj, kkt, passes, True, trace)
