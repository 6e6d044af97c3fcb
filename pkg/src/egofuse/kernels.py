"""Kernel functions and Gram-matrix assembly.

Supported kernels: linear, polynomial (dot+l)^p, RBF, and the
multi-channel decayed histogram intersection dc_int, which maps summed
per-channel histogram distances through exp(-sum D).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .validation import as_float_matrix


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    kind: str  # linear | polynomial | rbf | dc_int
    p: int = 3
    l: float = 1.0
    gamma: float | None = None
    channels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "polynomial", "rbf", "dc_int"):
            raise KernelError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "polynomial" and (self.p < 1 or self.l < 0):
            raise KernelError("polynomial needs integer p >= 1 and l >= 0")
        if self.kind == "rbf" and self.gamma is not None and self.gamma <= 0:
            raise KernelError("rbf gamma must be positive")
        if self.kind == "dc_int" and not self.channels:
            raise KernelError("dc_int needs a non-empty channel list")


@dataclass
class GramMatrix:
    matrix: np.ndarray
    spec: KernelSpec
    normalized: bool = False


def median_sq_dist(X: np.ndarray) -> float:
    """Median pairwise squared distance; used for the default RBF width."""
    X = as_float_matrix(X, "X")
    d2 = _pairwise_sq_dists(X, X)
    vals = d2[np.triu_indices(len(X), k=1)]
    if vals.size == 0:
        return 1.0
    med = float(np.median(vals))
    return med if med > 0 else 1.0


def rbf_gamma(X: np.ndarray) -> float:
    return 1.0 / median_sq_dist(X)


def _pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    aa = np.sum(A * A, axis=1)[:, None]
    bb = np.sum(B * B, axis=1)[None, :]
    return np.maximum(aa + bb - 2.0 * A @ B.T, 0.0)


def _dc_distance_matrix(Ha: np.ndarray, Hb: np.ndarray) -> np.ndarray:
    """D[i, j] = 1 - sum(min) / sum(max) for one histogram channel."""
    mins = np.minimum(Ha[:, None, :], Hb[None, :, :]).sum(axis=2)
    maxs = np.maximum(Ha[:, None, :], Hb[None, :, :]).sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        D = 1.0 - mins / maxs
    D[maxs == 0] = 0.0  # two empty histograms carry no evidence of difference
    return D


Samples = np.ndarray | dict[str, np.ndarray]


def _check_samples(spec: KernelSpec, samples: Samples) -> Samples:
    if spec.kind == "dc_int":
        if not isinstance(samples, dict):
            raise KernelError("dc_int expects a channel-name -> histogram-matrix dict")
        missing = [c for c in spec.channels if c not in samples]
        if missing:
            raise KernelError(f"dc_int missing channels: {missing}")
        return {c: as_float_matrix(samples[c], c) for c in spec.channels}
    return as_float_matrix(samples, "samples")


def cross_gram(spec: KernelSpec, samples_a: Samples, samples_b: Samples) -> np.ndarray:
    """Raw kernel block K[i, j] = k(a_i, b_j)."""
    A = _check_samples(spec, samples_a)
    B = _check_samples(spec, samples_b)
    if spec.kind == "dc_int":
        total = None
        for c in spec.channels:
            if A[c].shape[1] != B[c].shape[1]:
                raise KernelError(f"channel {c}: histogram width mismatch")
            D = _dc_distance_matrix(A[c], B[c])
            total = D if total is None else total + D
        return np.exp(-total)
    if A.shape[1] != B.shape[1]:
        raise KernelError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.kind == "linear":
        return A @ B.T
    if spec.kind == "polynomial":
        return (A @ B.T + spec.l) ** spec.p
    gamma = spec.gamma if spec.gamma is not None else rbf_gamma(A)
    return np.exp(-gamma * _pairwise_sq_dists(A, B))


def kernel_eval(spec: KernelSpec, x_i, x_j) -> float:
    if spec.kind == "dc_int":
        a = {c: np.atleast_2d(x_i[c]) for c in spec.channels}
        b = {c: np.atleast_2d(x_j[c]) for c in spec.channels}
        return float(cross_gram(spec, a, b)[0, 0])
    a = np.asarray(x_i, dtype=np.float64).ravel()
    b = np.asarray(x_j, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise KernelError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if spec.kind == "linear":
        return float(a @ b)
    if spec.kind == "polynomial":
        return float((a @ b + spec.l) ** spec.p)
    gamma = spec.gamma if spec.gamma is not None else rbf_gamma(a[None, :])
    diff = a - b
    return float(np.exp(-gamma * (diff @ diff)))


def gram(spec: KernelSpec, samples: Samples) -> GramMatrix:
    K = cross_gram(spec, samples, samples)
    K = 0.5 * (K + K.T)  # enforce exact symmetry against rounding
    return GramMatrix(matrix=K, spec=spec, normalized=False)


def self_similarities(spec: KernelSpec, samples: Samples) -> np.ndarray:
    """k(x, x) for each sample, without building the full Gram."""
    if spec.kind == "dc_int":
        A = _check_samples(spec, samples)
        n = next(iter(A.values())).shape[0]
        return np.ones(n)  # D(H, H) = 0 in every channel
    A = _check_samples(spec, samples)
    if spec.kind == "linear":
        return np.sum(A * A, axis=1)
    if spec.kind == "polynomial":
        return (np.sum(A * A, axis=1) + spec.l) ** spec.p
    return np.ones(A.shape[0])


def normalize(K: np.ndarray, diag_rows: np.ndarray | None = None,
              diag_cols: np.ndarray | None = None, zero_diag: str = "error") -> np.ndarray:
    """Unit-self-similarity scaling K' = K / sqrt(k_ii * k_jj).

    For square training Grams the diagonals default to diag(K); for
    rectangular test-vs-train blocks pass both self-similarity vectors.
    zero_diag selects what a non-positive self-similarity does: "error"
    raises, "one" leaves that sample's row/column unscaled.
    """
    K = np.asarray(K, dtype=np.float64)
    if diag_rows is None or diag_cols is None:
        if K.shape[0] != K.shape[1]:
            raise KernelError("rectangular blocks need explicit self-similarities")
        diag_rows = diag_cols = np.diag(K).copy()
    diag_rows = np.asarray(diag_rows, dtype=np.float64).copy()
    diag_cols = np.asarray(diag_cols, dtype=np.float64).copy()
    bad = (diag_rows <= 0, diag_cols <= 0)
    if bad[0].any() or bad[1].any():
        if zero_diag == "error":
            raise KernelError("zero self-similarity during normalization")
        diag_rows[bad[0]] = 1.0
        diag_cols[bad[1]] = 1.0
    return K / np.sqrt(np.outer(diag_rows, diag_cols))


def normalize_gram(g: GramMatrix, zero_diag: str = "error") -> GramMatrix:
    return GramMatrix(matrix=normalize(g.matrix, zero_diag=zero_diag), spec=g.spec, normalized=True)


GRAM_MAGIC = b"GRM1"


def write_gram(path: str | Path, K: np.ndarray) -> None:
    """Symmetric-packed dump: magic, u32 n, upper triangle as float64."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise KernelError("gram dump needs a square matrix")
    n = K.shape[0]
    iu = np.triu_indices(n)
    with open(path, "wb") as fh:
        fh.write(GRAM_MAGIC + struct.pack("<I", n))
        fh.write(K[iu].astype("<f8").tobytes())


def read_gram(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != GRAM_MAGIC:
        raise KernelError(f"{path}: bad gram magic")
    n = struct.unpack_from("<I", data, 4)[0]
    count = n * (n + 1) // 2
    packed = np.frombuffer(data[8 : 8 + 8 * count], dtype="<f8")
    if packed.size != count:
        raise KernelError(f"{path}: truncated gram dump")
    K = np.zeros((n, n))
    iu = np.triu_indices(n)
    K[iu] = packed
    K = K + K.T - np.diag(np.diag(K))
    return K
