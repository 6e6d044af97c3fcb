"""Boosted ensembles of single-kernel SVM weak learners.

Each round draws a weighted sample of the training set, fits one weak
SVM per kernel on the sample, keeps the kernel with the lowest weighted
error over the full set, and re-weights examples AdaBoost style. The
per-round kernel picks feed the selection-frequency reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .svm import DualSolution, decision_values, solve_binary
from .validation import as_label_vector, check_gram_stack, check_is_fitted


class BoostError(ValueError):
    pass


@dataclass(frozen=True)
class BoostRound:
    kernel_index: int
    solution: DualSolution
    sample_indices: np.ndarray
    weight: float
    error: float  # weighted error floored at 1/(2N), the value defining weight


@dataclass
class BoostEnsemble:
    rounds: list[BoostRound] = field(default_factory=list)
    n_train: int = 0
    final_distribution: np.ndarray | None = None

    @property
    def kernel_indices(self) -> list[int]:
        return [rd.kernel_index for rd in self.rounds]

    def error_bound(self) -> float:
        """AdaBoost product bound on the training error rate."""
        bound = 1.0
        for rd in self.rounds:
            if rd.weight == 0.0:
                continue  # zero-weight rounds leave the distribution unchanged
            bound *= 2.0 * math.sqrt(rd.error * (1.0 - rd.error))
        return bound


def round_weight(error: float) -> float:
    """Vote weight for a round with the given weighted error rate."""
    if not 0.0 < error < 1.0:
        raise BoostError(f"error rate must be in (0, 1), got {error}")
    return 0.5 * math.log((1.0 - error) / error)


def _draw_sample(rng, weights: np.ndarray, n_sample: int, y: np.ndarray) -> np.ndarray:
    for _ in range(6):  # initial draw plus at most 5 retries
        ix = rng.choice(len(weights), size=n_sample, replace=True, p=weights)
        if np.unique(y[ix]).size == 2:
            return ix
    raise BoostError("could not draw a sample containing both classes")


def mkboost_train(
    grams: np.ndarray,
    y: np.ndarray,
    T: int = 20,
    r: float = 0.5,
    C: float = 10.0,
    seed: int = 0,
    tol: float = 1e-3,
) -> BoostEnsemble:
    Ks = check_gram_stack(grams)
    if Ks.shape[0] < 1:
        raise BoostError("need at least one kernel")
    if not 0.0 < r <= 1.0:
        raise BoostError(f"sampling fraction must be in (0, 1], got {r}")
    if T < 1:
        raise BoostError(f"need at least one round, got {T}")
    N = Ks.shape[1]
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (N,):
        raise BoostError(f"labels shape {y.shape} does not match {N} examples")
    if not np.all(np.isin(y, (-1.0, 1.0))) or np.unique(y).size != 2:
        raise BoostError("labels must contain both +1 and -1")

    rng = np.random.default_rng(seed)
    S = np.full(N, 1.0 / N)
    n_sample = int(math.ceil(r * N))
    floor = 1.0 / (2.0 * N)
    ensemble = BoostEnsemble(n_train=N)

    for _ in range(T):
        chosen = None
        for _attempt in range(2):  # a failed round gets one fresh draw
            ix = _draw_sample(rng, S, n_sample, y)
            best = None
            for m in range(Ks.shape[0]):
                sol = solve_binary(Ks[m][np.ix_(ix, ix)], y[ix], C=C, tol=tol)
                vals = decision_values(sol, Ks[m][:, ix])
                pred = np.where(vals >= 0.0, 1.0, -1.0)
                eps = float(S[pred != y].sum())
                if best is None or eps < best[0]:
                    best = (eps, m, sol, ix, pred)
            chosen = best
            if chosen[0] < 0.5:
                break
        eps, m, sol, ix, pred = chosen
        if eps >= 0.5:
            ensemble.rounds.append(
                BoostRound(kernel_index=m, solution=sol, sample_indices=ix,
                           weight=0.0, error=eps)
            )
            continue
        eps = max(eps, floor)
        w = round_weight(eps)
        S = S * np.exp(-w * y * pred)
        S = S / S.sum()
        ensemble.rounds.append(
            BoostRound(kernel_index=m, solution=sol, sample_indices=ix,
                       weight=w, error=eps)
        )
    ensemble.final_distribution = S
    return ensemble


def boost_margins(ensemble: BoostEnsemble, test_blocks: np.ndarray) -> np.ndarray:
    """Weighted vote margins from per-kernel (n_test, n_train) blocks."""
    if not ensemble.rounds:
        raise BoostError("empty ensemble")
    blocks = np.asarray(test_blocks, dtype=np.float64)
    if blocks.ndim != 3 or blocks.shape[2] != ensemble.n_train:
        raise BoostError(
            f"expected blocks of shape (M, n_test, {ensemble.n_train}), got {blocks.shape}"
        )
    margins = np.zeros(blocks.shape[1])
    for rd in ensemble.rounds:
        if rd.weight == 0.0:
            continue
        rows = blocks[rd.kernel_index][:, rd.sample_indices]
        vals = decision_values(rd.solution, rows)
        margins += rd.weight * np.where(vals >= 0.0, 1.0, -1.0)
    return margins


def boost_predict(ensemble: BoostEnsemble, test_blocks: np.ndarray) -> np.ndarray:
    return np.where(boost_margins(ensemble, test_blocks) >= 0.0, 1.0, -1.0)


def selection_histogram(selections, kernel_specs):
    """Aggregate kernel picks into kind and feature-channel counts.

    selections: iterable of per-model kernel-index sequences (with
    multiplicity, one entry per pick). A channel is counted once per
    pick whose kernel uses it.
    """
    kind_counts: dict[str, int] = {}
    channel_counts: dict[str, int] = {}
    for sel in selections:
        for idx in sel:
            spec = kernel_specs[idx]
            kind_counts[spec.kind] = kind_counts.get(spec.kind, 0) + 1
            for ch in spec.channels:
                channel_counts[ch] = channel_counts.get(ch, 0) + 1
    return kind_counts, channel_counts


def histogram_csv(counts: dict[str, int], header: str) -> str:
    lines = [header]
    for name in sorted(counts):
        lines.append(f"{name},{counts[name]}")
    return "\n".join(lines) + "\n"


class MKBoostClassifier(BaseEstimator, ClassifierMixin):
    """One-vs-rest boosted multi-kernel classifier on Gram stacks."""

    def __init__(self, T: int = 20, r: float = 0.5, C: float = 10.0,
                 seed: int = 0, tol: float = 1e-3):
        self.T = T
        self.r = r
        self.C = C
        self.seed = seed
        self.tol = tol

    def fit(self, Ks, y):
        Ks = check_gram_stack(Ks)
        y = as_label_vector(y, Ks.shape[1])
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise BoostError("need at least 2 classes")
        self.ensembles_ = []
        for idx, c in enumerate(self.classes_):
            y_bin = np.where(y == c, 1.0, -1.0)
            child_seed = int(np.random.SeedSequence((self.seed, idx)).generate_state(1)[0])
            self.ensembles_.append(
                mkboost_train(Ks, y_bin, T=self.T, r=self.r, C=self.C,
                              seed=child_seed, tol=self.tol)
            )
        return self

    def decision_function(self, Ks_test):
        check_is_fitted(self, "ensembles_")
        return np.column_stack([boost_margins(e, Ks_test) for e in self.ensembles_])

    def predict(self, Ks_test):
        scores = self.decision_function(Ks_test)
        return self.classes_[np.argmax(scores, axis=1)]

    def kernel_selections(self) -> list[list[int]]:
        check_is_fitted(self, "ensembles_")
        return [e.kernel_indices for e in self.ensembles_]
