"""Small input-validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np


def as_float_matrix(X, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={X.ndim}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def as_label_vector(y, n_rows: int | None = None, name: str = "y") -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got ndim={y.ndim}")
    if n_rows is not None and len(y) != n_rows:
        raise ValueError(f"{name} has {len(y)} entries for {n_rows} rows")
    return y.astype(np.int64)


def check_gram(K, n_train: int | None = None, name: str = "K") -> np.ndarray:
    K = as_float_matrix(K, name)
    if n_train is None:
        if K.shape[0] != K.shape[1]:
            raise ValueError(f"{name} must be square, got {K.shape}")
    elif K.shape[1] != n_train:
        raise ValueError(f"{name} has {K.shape[1]} columns for {n_train} training rows")
    return K


def check_gram_stack(Ks, n_train: int | None = None, name: str = "kernels") -> np.ndarray:
    """Validate a stack of Gram matrices shaped (M, n, n) or (M, n_test, n_train)."""
    Ks = np.asarray(Ks, dtype=np.float64)
    if Ks.ndim != 3:
        raise ValueError(f"{name} must be 3-D (M, rows, cols), got ndim={Ks.ndim}")
    if not np.all(np.isfinite(Ks)):
        raise ValueError(f"{name} contains non-finite values")
    for m in range(Ks.shape[0]):
        check_gram(Ks[m], n_train, name=f"{name}[{m}]")
    return Ks


def check_is_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise RuntimeError(f"{type(estimator).__name__} is not fitted (missing {attribute})")
