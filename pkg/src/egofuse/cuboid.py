"""Spatio-temporal interest points and gradient cuboid descriptors.

Detector response is the squared quadrature output of a temporal Gabor
pair applied after spatial Gaussian smoothing; local maxima above a
threshold (relative to the per-video peak) become interest points. Each
point yields the flattened x/y/t brightness gradients of the enclosing
cuboid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

SIGMA = 2.0
TAU = 3.0
THRESHOLD = 2e-4
MAX_POINTS = 100

# descriptor cuboid: 13 x 13 spatial (about 6 sigma), 19 temporal (about 6 tau)
CUBOID_XY = 13
CUBOID_T = 19
CUBOID_DIM = 3 * CUBOID_XY * CUBOID_XY * CUBOID_T  # 9633


class CuboidError(ValueError):
    pass


@dataclass
class CuboidDescriptorSet:
    points: np.ndarray  # (n, 4): x, y, t, response
    descriptors: np.ndarray  # (n, CUBOID_DIM)


def temporal_gabor(tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature pair tuned to period 2*tau; even part is made DC-free."""
    half = int(np.ceil(3.0 * tau))
    t = np.arange(-half, half + 1, dtype=np.float64)
    omega = 1.0 / (2.0 * tau)
    env = np.exp(-(t * t) / (tau * tau))
    h_ev = -np.cos(2.0 * np.pi * omega * t) * env
    h_od = -np.sin(2.0 * np.pi * omega * t) * env
    h_ev = h_ev - h_ev.mean()
    h_ev /= np.linalg.norm(h_ev)
    h_od /= np.linalg.norm(h_od)
    return h_ev, h_od


def response_volume(frames: np.ndarray, sigma: float = SIGMA, tau: float = TAU) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    h_ev, h_od = temporal_gabor(tau)
    if frames.shape[0] < 2 * int(np.ceil(3.0 * tau)):
        raise CuboidError(f"need at least {2 * int(np.ceil(3.0 * tau))} frames")
    smooth = np.empty_like(frames)
    for t in range(frames.shape[0]):
        smooth[t] = ndimage.gaussian_filter(frames[t], sigma, mode="nearest")
    ev = ndimage.correlate1d(smooth, h_ev, axis=0, mode="nearest")
    od = ndimage.correlate1d(smooth, h_od, axis=0, mode="nearest")
    return ev * ev + od * od


def _extract_cuboid(volume: np.ndarray, t: int, y: int, x: int) -> np.ndarray:
    ht, hy, hx = CUBOID_T // 2, CUBOID_XY // 2, CUBOID_XY // 2
    T, H, W = volume.shape
    pt0, pt1 = max(0, ht - t), max(0, t + ht + 1 - T)
    py0, py1 = max(0, hy - y), max(0, y + hy + 1 - H)
    px0, px1 = max(0, hx - x), max(0, x + hx + 1 - W)
    block = volume[
        max(0, t - ht) : t + ht + 1,
        max(0, y - hy) : y + hy + 1,
        max(0, x - hx) : x + hx + 1,
    ]
    return np.pad(block, ((pt0, pt1), (py0, py1), (px0, px1)), mode="edge")


def compute_cuboids(
    frames: np.ndarray,
    sigma: float = SIGMA,
    tau: float = TAU,
    threshold: float = THRESHOLD,
    max_points: int = MAX_POINTS,
) -> CuboidDescriptorSet:
    frames = np.asarray(frames, dtype=np.float64)
    R = response_volume(frames, sigma, tau)
    peak = R.max()
    empty = CuboidDescriptorSet(
        points=np.empty((0, 4)), descriptors=np.empty((0, CUBOID_DIM))
    )
    if peak < 1e-9:
        return empty
    Rn = R / peak
    local_max = Rn == ndimage.maximum_filter(Rn, size=3, mode="nearest")
    ts, ys, xs = np.nonzero(local_max & (Rn >= threshold))
    if ts.size == 0:
        return empty
    resp = Rn[ts, ys, xs]
    order = np.lexsort((xs, ys, ts, -resp))[:max_points]
    ts, ys, xs, resp = ts[order], ys[order], xs[order], resp[order]

    gt, gy, gx = np.gradient(frames)
    descs = np.empty((ts.size, CUBOID_DIM))
    for i in range(ts.size):
        parts = [
            _extract_cuboid(g, int(ts[i]), int(ys[i]), int(xs[i])).ravel()
            for g in (gt, gy, gx)
        ]
        descs[i] = np.concatenate(parts)
    points = np.column_stack([xs, ys, ts, resp]).astype(np.float64)
    return CuboidDescriptorSet(points=points, descriptors=descs)
