"""Soft-margin SVM dual solver on precomputed Gram matrices.

Pairwise coordinate ascent with maximal-violating-pair selection and a
maintained gradient; a one-vs-rest wrapper handles multiclass. Serves as
the inner solver for the multi-kernel trainers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .validation import as_label_vector, check_gram, check_is_fitted

_TAU = 1e-12  # curvature floor; degenerate pairs take the full clipped step


class SvmError(ValueError):
    pass


@dataclass
class DualSolution:
    alpha: np.ndarray
    bias: float
    y: np.ndarray  # labels in {-1, +1}
    C: float
    objective: float
    n_iter: int
    converged: bool
    support_: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.support_ = np.flatnonzero(self.alpha > 1e-8)


def solve_binary(
    K: np.ndarray,
    y: np.ndarray,
    C: float = 10.0,
    tol: float = 1e-3,
    alpha0: np.ndarray | None = None,
    max_iter: int = 200_000,
) -> DualSolution:
    K = check_gram(K)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if K.shape[0] != n:
        raise SvmError(f"K is {K.shape[0]}x{K.shape[1]} for {n} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise SvmError("labels must be -1/+1")
    if len(np.unique(y)) < 2:
        raise SvmError("both label values must be present")
    if C <= 0:
        raise SvmError("C must be positive")

    Q = (y[:, None] * y[None, :]) * K
    if alpha0 is None:
        alpha = np.zeros(n)
        grad = -np.ones(n)
    else:
        alpha = np.clip(np.asarray(alpha0, dtype=np.float64).copy(), 0.0, C)
        grad = Q @ alpha - 1.0

    yg = np.empty(n)
    it = 0
    converged = False
    while it < max_iter:
        np.multiply(-y, grad, out=yg)
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        up_vals = np.where(up, yg, -np.inf)
        low_vals = np.where(low, yg, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        if up_vals[i] - low_vals[j] < tol:
            converged = True
            break

        # curvature along the constraint-preserving direction for the pair
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = _TAU
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        grad += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)
        it += 1

    objective = float(0.5 * (alpha.sum() - alpha @ grad))
    bias = _compute_bias(alpha, grad, y, C)
    return DualSolution(
        alpha=alpha, bias=bias, y=y.copy(), C=C,
        objective=objective, n_iter=it, converged=converged,
    )


def _compute_bias(alpha: np.ndarray, grad: np.ndarray, y: np.ndarray, C: float) -> float:
    yg = -y * grad
    eps = 1e-8 * max(C, 1.0)
    free = (alpha > eps) & (alpha < C - eps)
    if free.any():
        return float(np.mean(yg[free]))
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    hi = yg[up].max() if up.any() else 0.0
    lo = yg[low].min() if low.any() else 0.0
    return float((hi + lo) / 2.0)


def decision_value(sol: DualSolution, k_row: np.ndarray) -> float:
    k_row = np.asarray(k_row, dtype=np.float64)
    if k_row.shape != sol.alpha.shape:
        raise SvmError(f"kernel row length {k_row.shape} != training size {sol.alpha.shape}")
    return float((sol.alpha * sol.y) @ k_row + sol.bias)


def decision_values(sol: DualSolution, k_block: np.ndarray) -> np.ndarray:
    """Decision values for a (n_queries, n_train) kernel block."""
    k_block = np.atleast_2d(np.asarray(k_block, dtype=np.float64))
    if k_block.shape[1] != len(sol.alpha):
        raise SvmError(f"kernel block has {k_block.shape[1]} columns for {len(sol.alpha)} training rows")
    return k_block @ (sol.alpha * sol.y) + sol.bias


class KernelSVC(BaseEstimator, ClassifierMixin):
    """One-vs-rest SVM over a precomputed (training) Gram matrix.

    fit takes the n x n Gram and integer labels; predict takes the
    (n_queries, n_train) kernel block against the training samples.
    """

    def __init__(self, C: float = 10.0, tol: float = 1e-3):
        self.C = C
        self.tol = tol

    def fit(self, K, y):
        K = check_gram(K)
        y = as_label_vector(y, K.shape[0])
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise SvmError("need at least 2 classes")
        self.solutions_ = []
        for c in self.classes_:
            y_bin = np.where(y == c, 1.0, -1.0)
            self.solutions_.append(solve_binary(K, y_bin, C=self.C, tol=self.tol))
        return self

    def decision_function(self, K_block):
        check_is_fitted(self, "solutions_")
        return np.column_stack([decision_values(s, K_block) for s in self.solutions_])

    def predict(self, K_block):
        scores = self.decision_function(K_block)
        return self.classes_[np.argmax(scores, axis=1)]
