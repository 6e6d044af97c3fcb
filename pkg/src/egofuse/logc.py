"""Log-covariance window features: 78-dim vectors from 12x12 matrix logs.

Every pixel of every time step carries a 12-dim local-dynamics vector;
each temporal window's covariance is regularized, mapped through the
matrix logarithm, and vectorized so Euclidean distances between vectors
equal Frobenius distances between the log matrices.
"""

from __future__ import annotations

import numpy as np

from .flow import FlowField

PIXEL_DIM = 12
LOGC_DIM = PIXEL_DIM * (PIXEL_DIM + 1) // 2  # 78
WINDOW_LEN = 15
STRIDE = 5


class LogCError(ValueError):
    pass


def pixel_features(frames: np.ndarray, flows: list[FlowField]) -> np.ndarray:
    """Per-step 12-channel maps, shape (T-1, 12, H, W).

    Channels: I_t, u, v, u_t, v_t, u_x, u_y, v_x, v_y, divergence,
    vorticity, shear. Temporal flow derivatives use forward differences
    with the final step replicated; spatial ones are central differences.
    """
    frames = np.asarray(frames, dtype=np.float64)
    T = frames.shape[0]
    if len(flows) != T - 1:
        raise LogCError(f"expected {T - 1} flows for {T} frames, got {len(flows)}")
    u = np.stack([f.u for f in flows])
    v = np.stack([f.v for f in flows])
    i_t = np.diff(frames, axis=0)
    if len(flows) >= 2:
        u_t = np.concatenate([np.diff(u, axis=0), np.diff(u, axis=0)[-1:]])
        v_t = np.concatenate([np.diff(v, axis=0), np.diff(v, axis=0)[-1:]])
    else:
        u_t = np.zeros_like(u)
        v_t = np.zeros_like(v)
    u_y, u_x = np.gradient(u, axis=(1, 2))
    v_y, v_x = np.gradient(v, axis=(1, 2))
    div = u_x + v_y
    vort = v_x - u_y
    shear = 0.5 * (u_y + v_x)
    return np.stack([i_t, u, v, u_t, v_t, u_x, u_y, v_x, v_y, div, vort, shear], axis=1)


def logm_spd(sigma: np.ndarray) -> np.ndarray:
    """Matrix logarithm of a symmetric positive-definite matrix."""
    vals, vecs = np.linalg.eigh(sigma)
    return (vecs * np.log(vals)) @ vecs.T


def expm_sym(logmat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(logmat)
    return (vecs * np.exp(vals)) @ vecs.T


_IU, _JU = np.triu_indices(PIXEL_DIM)
_SCALE = np.where(_IU == _JU, 1.0, np.sqrt(2.0))


def vectorize_sym(mat: np.ndarray) -> np.ndarray:
    """Upper triangle with off-diagonal sqrt(2) scaling (isometric)."""
    return mat[_IU, _JU] * _SCALE


def devectorize_sym(vec: np.ndarray) -> np.ndarray:
    out = np.zeros((PIXEL_DIM, PIXEL_DIM))
    out[_IU, _JU] = vec / _SCALE
    out = out + out.T - np.diag(np.diag(out))
    return out


def window_vector(samples: np.ndarray) -> np.ndarray:
    """78-dim log-covariance vector of an (n, 12) sample block."""
    if samples.shape[0] < 2:
        raise LogCError("window needs at least 2 samples")
    sigma = np.cov(samples, rowvar=False)
    eps = max(1e-5 * np.trace(sigma) / PIXEL_DIM, 1e-12)
    return vectorize_sym(logm_spd(sigma + eps * np.eye(PIXEL_DIM)))


def compute_logc_windows(
    frames: np.ndarray,
    flows: list[FlowField],
    window_len: int = WINDOW_LEN,
    stride: int = STRIDE,
) -> np.ndarray:
    """Stack of 78-dim vectors, one per temporal window (possibly empty)."""
    if window_len < 2 or stride < 1:
        raise LogCError("window_len >= 2 and stride >= 1 required")
    n_frames = np.asarray(frames).shape[0]
    if window_len > n_frames:
        raise LogCError("window_len exceeds frame count")
    maps = pixel_features(frames, flows)  # (T-1, 12, H, W)
    # a window of window_len frames spans window_len - 1 flow steps
    vectors = []
    for start in range(0, n_frames - window_len + 1, stride):
        block = maps[start : start + window_len - 1]
        samples = block.transpose(0, 2, 3, 1).reshape(-1, PIXEL_DIM)
        vectors.append(window_vector(samples))
    if not vectors:
        return np.empty((0, LOGC_DIM))
    return np.stack(vectors)
