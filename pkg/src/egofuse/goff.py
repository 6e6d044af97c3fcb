"""Grid optical flow features: 137-dim global motion descriptor.

Layout: 15 magnitude-histogram bins, 36 direction-histogram bins, 36
temporal direction-spread values, 25 spectral components of the dominant
direction series, 25 spectral components of the per-frame magnitude
spread series.
"""

from __future__ import annotations

import numpy as np

from .flow import FlowField

MAG_GATE = 0.1  # px/frame; slower cells carry no usable direction
N_MAG_BINS = 15
N_DIR_BINS = 36
N_FT = 25

# bin 0 is [0, 0.1); the remaining 14 bins are geometric steps up to 16 px/frame
_MAG_EDGES = np.concatenate(([0.0], np.geomspace(MAG_GATE, 16.0, N_MAG_BINS), [np.inf]))

GOFF_DIM = N_MAG_BINS + 2 * N_DIR_BINS + 2 * N_FT


class GoffError(ValueError):
    pass


def _cell_means(field: np.ndarray, gx: int, gy: int) -> np.ndarray:
    rows = np.array_split(field, gy, axis=0)
    out = np.empty((gy, gx))
    for r, band in enumerate(rows):
        for c, cell in enumerate(np.array_split(band, gx, axis=1)):
            out[r, c] = cell.mean()
    return out.ravel()


def spectrum_lowest(series: np.ndarray, count: int) -> np.ndarray:
    """Magnitudes of the `count` lowest non-negative DFT frequencies.

    Short series are zero-padded so the spectrum always has `count` bins.
    """
    series = np.asarray(series, dtype=np.float64)
    n = max(len(series), 2 * (count - 1))
    return np.abs(np.fft.rfft(series, n=n))[:count]


def compute_goff(flows: list[FlowField], grid: tuple[int, int] = (8, 8)) -> np.ndarray:
    if len(flows) < 2:
        raise GoffError("need at least 2 flow fields")
    gx, gy = grid
    if gx < 1 or gy < 1:
        raise GoffError("grid cells must be positive")

    n_frames = len(flows)
    n_cells = gx * gy
    mags = np.empty((n_frames, n_cells))
    dirs = np.empty((n_frames, n_cells))
    for t, f in enumerate(flows):
        cu = _cell_means(f.u, gx, gy)
        cv = _cell_means(f.v, gx, gy)
        mags[t] = np.hypot(cu, cv)
        dirs[t] = np.degrees(np.arctan2(cv, cu)) % 360.0

    flat_mags = mags.ravel()
    mmhf, _ = np.histogram(flat_mags, bins=_MAG_EDGES)
    # merge the overflow bin (>= 16) into the top geometric bin
    mmhf = np.concatenate([mmhf[:N_MAG_BINS - 1], [mmhf[N_MAG_BINS - 1] + mmhf[N_MAG_BINS]]])
    mmhf = mmhf / flat_mags.size

    moving = flat_mags >= MAG_GATE
    dir_bins_flat = np.minimum((dirs.ravel() / 10.0).astype(np.int64), N_DIR_BINS - 1)
    mdhf = np.bincount(dir_bins_flat[moving], minlength=N_DIR_BINS).astype(np.float64)
    total = mdhf.sum()
    if total > 0:
        mdhf = mdhf / total

    # per-frame direction histograms (each L1-normalized when it has mass)
    frame_hists = np.zeros((n_frames, N_DIR_BINS))
    dir_bins = np.minimum((dirs / 10.0).astype(np.int64), N_DIR_BINS - 1)
    for t in range(n_frames):
        keep = mags[t] >= MAG_GATE
        if np.any(keep):
            h = np.bincount(dir_bins[t][keep], minlength=N_DIR_BINS).astype(np.float64)
            frame_hists[t] = h / h.sum()
    mdhsf = frame_hists.std(axis=0)

    dominant = np.where(frame_hists.sum(axis=1) > 0, frame_hists.argmax(axis=1), 0)
    ftmaf = spectrum_lowest(dominant.astype(np.float64), N_FT)
    spread = mags.std(axis=1)
    ftmpf = spectrum_lowest(spread, N_FT)

    out = np.concatenate([mmhf, mdhf, mdhsf, ftmaf, ftmpf])
    assert out.shape == (GOFF_DIM,)
    return out
