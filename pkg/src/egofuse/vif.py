"""Visual intensity features: 106-dim centroid-dynamics descriptor.

Tracks the intensity-weighted pixel centroid over time, differentiates
it into velocity and acceleration, and summarizes the six signals
(vx, vy, ax, ay, |v|, |a|) by zero-crossing rates, seven statistics and
ten low-frequency spectral magnitudes.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

from .goff import spectrum_lowest

N_FF = 10
VIF_DIM = 4 + 7 * 6 + N_FF * 6


class VifError(ValueError):
    pass


def intensity_centroid(frame: np.ndarray) -> tuple[float, float]:
    """(x, y) centroid of mean-subtracted, positive-clipped intensity."""
    w = np.clip(frame - frame.mean(), 0.0, None)
    mass = w.sum()
    if mass <= 0:
        raise VifError("zero-mass frames")
    h, wdt = frame.shape
    ys, xs = np.mgrid[0:h, 0:wdt]
    return float((w * xs).sum() / mass), float((w * ys).sum() / mass)


def zero_crossing_rate(signal: np.ndarray) -> float:
    """Sign changes of the mean-removed signal per adjacent sample pair.

    Residuals below 1e-9 of the signal's peak magnitude (floor 1e-12) are
    treated as exact zeros so that constant tracks register no crossings
    despite floating-point jitter.
    """
    s = np.asarray(signal, dtype=np.float64)
    if len(s) < 2:
        return 0.0
    m = s - s.mean()
    tol = max(1e-9 * float(np.max(np.abs(s))), 1e-12)
    signs = np.sign(m[np.abs(m) > tol])
    if len(signs) < 2:
        return 0.0
    return float(np.sum(signs[:-1] != signs[1:]) / (len(s) - 1))


def seven_stats(signal: np.ndarray) -> np.ndarray:
    """[min, max, median, energy, kurtosis, mean, std]; energy = mean square."""
    s = np.asarray(signal, dtype=np.float64)
    if s.std() <= 0:
        kurt = 0.0
    else:
        kurt = float(stats.kurtosis(s, fisher=True, bias=True))
    return np.array(
        [s.min(), s.max(), float(np.median(s)), float(np.mean(s * s)), kurt, s.mean(), s.std()]
    )


def centroid_track(frames: np.ndarray) -> np.ndarray:
    return np.array([intensity_centroid(frames[t]) for t in range(frames.shape[0])])


def compute_vif(frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 3 or frames.shape[0] < 4:
        raise VifError("need a (T, H, W) stack with T >= 4")
    track = centroid_track(frames)
    vel = np.diff(track, axis=0)
    acc = np.diff(vel, axis=0)
    vx, vy = vel[:, 0], vel[:, 1]
    ax, ay = acc[:, 0], acc[:, 1]
    signals = [vx, vy, ax, ay, np.hypot(vx, vy), np.hypot(ax, ay)]

    zc = np.array([zero_crossing_rate(s) for s in (vx, vy, ax, ay)])
    stats_block = np.concatenate([seven_stats(s) for s in signals])
    ff_block = np.concatenate([spectrum_lowest(s, N_FF) for s in signals])
    out = np.concatenate([zc, stats_block, ff_block])
    assert out.shape == (VIF_DIM,)
    return out
