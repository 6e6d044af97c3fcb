"""Codebook learning, bag-of-words encoding, PCA, and standardization.

All fitting happens on training segments only; fitted models are
immutable and can be serialized into a FeatureTable under ``model:``
channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .cache import FeatureTable
from .validation import as_float_matrix, check_is_fitted


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class Codebook:
    centers: np.ndarray  # (k, d)
    seed: int

    @property
    def k(self) -> int:
        return self.centers.shape[0]


def _sq_dists(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # (n, k) squared Euclidean distances via the expanded product
    xx = np.sum(X * X, axis=1)[:, None]
    cc = np.sum(centers * centers, axis=1)[None, :]
    return np.maximum(xx + cc - 2.0 * X @ centers.T, 0.0)


def _plusplus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = _sq_dists(X, centers[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = X[rng.integers(n)]
            continue
        probs = d2 / total
        centers[j] = X[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, _sq_dists(X, centers[j : j + 1]).ravel())
    return centers


def kmeans_fit(vectors: np.ndarray, k: int, seed: int, max_iter: int = 100) -> Codebook:
    X = as_float_matrix(vectors, "vectors")
    n = X.shape[0]
    if k < 1:
        raise EncodingError("k must be >= 1")
    if n < k:
        raise EncodingError(f"need at least k={k} vectors, got {n}")
    rng = np.random.default_rng(seed)
    centers = _plusplus_init(X, k, rng)
    assign = np.full(n, -1)
    for _ in range(max_iter):
        d2 = _sq_dists(X, centers)
        new_assign = np.argmin(d2, axis=1)
        for j in range(k):
            members = new_assign == j
            if members.any():
                centers[j] = X[members].mean(axis=0)
            else:
                # reseed an empty cluster on the worst-represented point
                worst = np.argmax(d2[np.arange(n), new_assign])
                centers[j] = X[worst]
                new_assign[worst] = j
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return Codebook(centers=centers, seed=seed)


def bow_encode(vectors: np.ndarray, codebook: Codebook) -> np.ndarray:
    """L1-normalized nearest-center histogram; empty input -> uniform."""
    k = codebook.k
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.size == 0:
        return np.full(k, 1.0 / k)
    X = as_float_matrix(vectors, "vectors")
    if X.shape[1] != codebook.centers.shape[1]:
        raise EncodingError(
            f"dimension mismatch: vectors are {X.shape[1]}-dim, codebook is "
            f"{codebook.centers.shape[1]}-dim"
        )
    assign = np.argmin(_sq_dists(X, codebook.centers), axis=1)  # ties: lowest index
    counts = np.bincount(assign, minlength=k).astype(np.float64)
    return counts / counts.sum()


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (d,)
    basis: np.ndarray  # (d, r), orthonormal columns
    explained_variance: np.ndarray  # (r,), descending

    @property
    def r(self) -> int:
        return self.basis.shape[1]


def pca_fit(vectors: np.ndarray, retained: int | float) -> PcaModel:
    X = as_float_matrix(vectors, "vectors")
    n, d = X.shape
    if n < 2:
        raise EncodingError("PCA needs at least 2 vectors")
    rank_cap = min(n - 1, d)
    mean = X.mean(axis=0)
    _, svals, vt = np.linalg.svd(X - mean, full_matrices=False)
    var = (svals * svals) / (n - 1)
    if isinstance(retained, float) and 0.0 < retained < 1.0:
        total = var.sum()
        if total <= 0:
            r = 1
        else:
            r = int(np.searchsorted(np.cumsum(var) / total, retained) + 1)
        r = min(r, rank_cap)
    else:
        r = int(retained)
        if r < 1 or r > rank_cap:
            raise EncodingError(f"retained={r} outside [1, {rank_cap}]")
    basis = vt[:r].T
    # deterministic sign: largest-magnitude loading of each component positive
    flips = np.sign(basis[np.argmax(np.abs(basis), axis=0), np.arange(r)])
    flips[flips == 0] = 1.0
    return PcaModel(mean=mean, basis=basis * flips, explained_variance=var[:r])


def pca_project(model: PcaModel, vectors: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    out = (X - model.mean) @ model.basis
    return out[0] if np.asarray(vectors).ndim == 1 else out


def standardize_fit(vectors: np.ndarray) -> np.ndarray:
    """Per-dimension training standard deviations; zero variance maps to 1.

    A column counts as zero-variance when its std is below 1e-12 of its
    peak magnitude, so constant columns pass through despite rounding.
    """
    X = as_float_matrix(vectors, "vectors")
    scales = X.std(axis=0)
    peak = np.maximum(np.max(np.abs(X), axis=0), 1.0)
    scales[scales <= 1e-12 * peak] = 1.0
    return scales


def standardize_apply(vectors: np.ndarray, scales: np.ndarray) -> np.ndarray:
    return np.asarray(vectors, dtype=np.float64) / scales


class CodebookEncoder(BaseEstimator, TransformerMixin):
    """Fit a k-means codebook, then encode vector sets as histograms.

    transform expects one (m, d) descriptor set and returns its (k,)
    bag-of-words histogram.
    """

    def __init__(self, k: int = 300, seed: int = 0, max_iter: int = 100):
        self.k = k
        self.seed = seed
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        k = min(self.k, X.shape[0])  # small corpora cannot fill every word
        self.codebook_ = kmeans_fit(X, k, self.seed, self.max_iter)
        return self

    def transform(self, X):
        check_is_fitted(self, "codebook_")
        return bow_encode(X, self.codebook_)


class PcaReducer(BaseEstimator, TransformerMixin):
    def __init__(self, retained: int | float = 128):
        self.retained = retained

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        retained = self.retained
        if isinstance(retained, int):
            retained = min(retained, X.shape[0] - 1, X.shape[1])
        self.model_ = pca_fit(X, retained)
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return pca_project(self.model_, X)


class StdScaler(BaseEstimator, TransformerMixin):
    def fit(self, X, y=None):
        self.scales_ = standardize_fit(X)
        return self

    def transform(self, X):
        check_is_fitted(self, "scales_")
        return standardize_apply(X, self.scales_)


def save_models(table: FeatureTable, prefix: str, **arrays: np.ndarray) -> None:
    """Store named model arrays as ``model:<prefix>:<name>`` channels."""
    for name, arr in arrays.items():
        mat = np.atleast_2d(np.asarray(arr, dtype=np.float64))
        ids = ["%06d" % i for i in range(mat.shape[0])]
        table.set_channel(f"model:{prefix}:{name}", ids, mat)


def load_model(table: FeatureTable, prefix: str, name: str) -> np.ndarray:
    return table.get_channel(f"model:{prefix}:{name}")[1]
