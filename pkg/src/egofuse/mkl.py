"""Simplex-constrained multi-kernel learning by reduced-gradient descent.

Kernel weights d live on the probability simplex; each step solves the
SVM dual on the weighted kernel sum, walks the descent direction across
simplex vertices while the objective keeps dropping, then refines the
step length by golden-section search with warm-started inner solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .svm import DualSolution, decision_values, solve_binary
from .validation import as_label_vector, check_gram_stack, check_is_fitted

SELECTION_FLOOR = 1e-4  # weights below this count as "not selected"
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class MklError(ValueError):
    pass


@dataclass
class MklModel:
    weights: np.ndarray  # (M,) on the simplex
    inner: DualSolution
    objective_trace: list[float]
    n_outer: int
    converged: bool

    @property
    def selected(self) -> np.ndarray:
        return np.flatnonzero(self.weights >= SELECTION_FLOOR)


def combine_kernels(weights: np.ndarray, Ks: np.ndarray) -> np.ndarray:
    return np.tensordot(weights, Ks, axes=(0, 0))


def _gradient(Ks: np.ndarray, sol: DualSolution) -> np.ndarray:
    """dJ/dd_m at the current dual optimum (alpha held fixed)."""
    beta = sol.alpha * sol.y
    return np.array([-0.5 * beta @ Km @ beta for Km in Ks])


def _direction(d: np.ndarray, grad: np.ndarray, mu: int) -> np.ndarray:
    red = grad - grad[mu]
    D = -red
    D[(d <= 0) & (red > 0)] = 0.0
    D[mu] = 0.0
    D[mu] = -D.sum()
    return D


def _project_simplex(d: np.ndarray) -> np.ndarray:
    d = np.maximum(d, 0.0)
    total = d.sum()
    if total <= 0:
        raise MklError("kernel weights collapsed to zero")
    if abs(total - 1.0) > 1e-12:
        d = d / total
    return d


def simple_mkl_train(
    grams: np.ndarray,
    y: np.ndarray,
    C: float = 10.0,
    outer_tol: float = 1e-3,
    max_outer: int = 50,
    inner_tol: float = 1e-5,
    line_search_evals: int = 20,
) -> MklModel:
    Ks = check_gram_stack(grams)
    M = Ks.shape[0]
    if M < 1:
        raise MklError("need at least one kernel")
    y = np.asarray(y, dtype=np.float64)

    d = np.full(M, 1.0 / M)
    alpha_ws: np.ndarray | None = None
    trace: list[float] = []
    converged = False
    sol = solve_binary(combine_kernels(d, Ks), y, C=C, tol=inner_tol)
    alpha_ws = sol.alpha

    for outer in range(1, max_outer + 1):
        J_cur = sol.objective
        trace.append(J_cur)
        grad = _gradient(Ks, sol)
        g = -grad  # each entry >= 0 for PSD kernels
        gap = float(g.max() - g @ d)
        if gap < outer_tol:
            converged = True
            break

        mu = int(np.argmax(d))
        D = _direction(d, grad, mu)
        if np.max(np.abs(D)) < 1e-12:
            converged = True
            break

        # walk vertex to vertex while the boundary point keeps improving
        d_dag, D_dag = d.copy(), D.copy()
        J_dag = 0.0
        gamma_max = 0.0
        alpha_dag = alpha_ws
        sol_dag = sol
        for _ in range(M + 1):
            if not J_dag < J_cur - 1e-12 * (1.0 + abs(J_cur)):
                break
            d, D = d_dag, D_dag
            neg = np.flatnonzero(D < -1e-12)
            if neg.size == 0:
                break
            ratios = -d[neg] / D[neg]
            pick = int(np.argmin(ratios))
            nu = int(neg[pick])
            gamma_max = float(ratios[pick])
            d_dag = d + gamma_max * D
            d_dag[nu] = 0.0
            D_dag = D.copy()
            D_dag[mu] = D_dag[mu] - D[nu]
            D_dag[nu] = 0.0
            sol_dag = solve_binary(
                combine_kernels(_project_simplex(d_dag), Ks), y, C=C,
                tol=inner_tol, alpha0=alpha_dag,
            )
            alpha_dag = sol_dag.alpha
            J_dag = sol_dag.objective
        else:
            pass
        if gamma_max <= 0:
            converged = True
            break

        # golden-section refinement of the step length on [0, gamma_max]
        best_gamma, best_J, best_sol = 0.0, J_cur, sol
        if J_dag < best_J:
            best_gamma, best_J, best_sol = gamma_max, J_dag, sol_dag
        evals = 2  # endpoints already known
        a, b = 0.0, gamma_max
        x1 = b - _GOLDEN * (b - a)
        x2 = a + _GOLDEN * (b - a)
        cache_alpha = alpha_ws

        def phi(gamma: float) -> tuple[float, DualSolution]:
            nonlocal cache_alpha
            dd = _project_simplex(d + gamma * D)
            s = solve_binary(combine_kernels(dd, Ks), y, C=C, tol=inner_tol, alpha0=cache_alpha)
            cache_alpha = s.alpha
            return s.objective, s

        f1, s1 = phi(x1)
        f2, s2 = phi(x2)
        evals += 2
        for gamma, fval, s in ((x1, f1, s1), (x2, f2, s2)):
            if fval < best_J:
                best_gamma, best_J, best_sol = gamma, fval, s
        while evals < line_search_evals:
            if f1 <= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - _GOLDEN * (b - a)
                f1, s1 = phi(x1)
                if f1 < best_J:
                    best_gamma, best_J, best_sol = x1, f1, s1
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + _GOLDEN * (b - a)
                f2, s2 = phi(x2)
                if f2 < best_J:
                    best_gamma, best_J, best_sol = x2, f2, s2
            evals += 1

        d_new = _project_simplex(d + best_gamma * D)
        delta = float(np.max(np.abs(d_new - d)))
        d = d_new
        sol = best_sol
        alpha_ws = sol.alpha
        if delta < 1e-6:
            trace.append(sol.objective)
            converged = True
            break
    else:
        outer = max_outer

    if trace and sol.objective < trace[-1]:
        trace.append(sol.objective)
    return MklModel(
        weights=d, inner=sol, objective_trace=trace, n_outer=outer, converged=converged
    )


def mkl_decision_values(model: MklModel, test_blocks: np.ndarray) -> np.ndarray:
    """Decision values from per-kernel (n_test, n_train) blocks."""
    blocks = np.asarray(test_blocks, dtype=np.float64)
    if blocks.ndim != 3 or blocks.shape[0] != len(model.weights):
        raise MklError(
            f"expected {len(model.weights)} kernel blocks, got shape {blocks.shape}"
        )
    return decision_values(model.inner, combine_kernels(model.weights, blocks))


class SimpleMKLClassifier(BaseEstimator, ClassifierMixin):
    """One-vs-rest multi-kernel classifier on precomputed Gram stacks.

    fit takes (M, n, n) normalized training Grams; predict takes the
    matching (M, n_test, n_train) stack of test blocks.
    """

    def __init__(
        self,
        C: float = 10.0,
        outer_tol: float = 1e-3,
        max_outer: int = 50,
        inner_tol: float = 1e-5,
    ):
        self.C = C
        self.outer_tol = outer_tol
        self.max_outer = max_outer
        self.inner_tol = inner_tol

    def fit(self, Ks, y):
        Ks = check_gram_stack(Ks)
        y = as_label_vector(y, Ks.shape[1])
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise MklError("need at least 2 classes")
        self.models_ = []
        for c in self.classes_:
            y_bin = np.where(y == c, 1.0, -1.0)
            self.models_.append(
                simple_mkl_train(
                    Ks, y_bin, C=self.C, outer_tol=self.outer_tol,
                    max_outer=self.max_outer, inner_tol=self.inner_tol,
                )
            )
        return self

    def decision_function(self, Ks_test):
        check_is_fitted(self, "models_")
        return np.column_stack([mkl_decision_values(m, Ks_test) for m in self.models_])

    def predict(self, Ks_test):
        scores = self.decision_function(Ks_test)
        return self.classes_[np.argmax(scores, axis=1)]

    def selected_kernels(self) -> np.ndarray:
        """Union of per-class selections (weight >= 1e-4)."""
        check_is_fitted(self, "models_")
        out: set[int] = set()
        for m in self.models_:
            out.update(m.selected.tolist())
        return np.array(sorted(out), dtype=np.int64)
