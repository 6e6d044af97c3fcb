"""Audio chain: WAV loading, 24 kHz resampling, MFCC frames, UBM, MAP
adaptation, and per-segment supervectors.

MFCC layout per frame: c1..c12, raw log energy, then deltas and
delta-deltas of those 13, giving 39 columns.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sp_signal
from scipy.fft import dct
from scipy.special import logsumexp

from .encoding import kmeans_fit
from .validation import as_float_matrix

TARGET_RATE = 24000


class AudioError(ValueError):
    pass


@dataclass(frozen=True)
class MfccConfig:
    sample_rate: int = TARGET_RATE
    frame_len_ms: float = 40.0
    frame_shift_ms: float = 10.0
    n_filters: int = 23
    n_ceps: int = 12
    delta_span: int = 3
    delta_delta_span: int = 2
    pre_emphasis: float = 0.97

    @property
    def frame_len(self) -> int:
        return int(round(self.sample_rate * self.frame_len_ms / 1000.0))

    @property
    def frame_shift(self) -> int:
        return int(round(self.sample_rate * self.frame_shift_ms / 1000.0))

    def __post_init__(self) -> None:
        if self.frame_len <= self.frame_shift:
            raise AudioError("frame length must exceed frame shift")
        if self.n_ceps >= self.n_filters:
            raise AudioError("n_ceps must be below n_filters")


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Mono 16-bit PCM samples scaled to [-1, 1), plus the sample rate."""
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1:
            raise AudioError(f"{path}: expected mono audio, got {wf.getnchannels()} channels")
        if wf.getsampwidth() != 2:
            raise AudioError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def write_wav(path: str | Path, samples: np.ndarray, rate: int) -> None:
    pcm = np.clip(np.asarray(samples) * 32767.0, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(pcm.tobytes())


def resample_to(samples: np.ndarray, rate: int, target: int = TARGET_RATE) -> np.ndarray:
    """Polyphase FIR resampling (Kaiser beta 5.0 anti-aliasing filter)."""
    if rate == target:
        return np.asarray(samples, dtype=np.float64)
    g = np.gcd(int(rate), int(target))
    return sp_signal.resample_poly(np.asarray(samples, dtype=np.float64), target // g, rate // g)


def load_audio(path: str | Path) -> np.ndarray:
    samples, rate = read_wav(path)
    return resample_to(samples, rate)


def mel_filterbank(n_filters: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters over [0, Nyquist] spaced evenly on the mel scale."""
    mel = lambda f: 2595.0 * np.log10(1.0 + f / 700.0)
    inv = lambda m: 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    points = inv(np.linspace(mel(0.0), mel(sample_rate / 2.0), n_filters + 2))
    bin_freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    bank = np.zeros((n_filters, len(bin_freqs)))
    for m in range(n_filters):
        lo, mid, hi = points[m], points[m + 1], points[m + 2]
        rising = (bin_freqs - lo) / (mid - lo)
        falling = (hi - bin_freqs) / (hi - mid)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def _deltas(static: np.ndarray, span: int) -> np.ndarray:
    """Regression deltas over +-span frames with edge replication."""
    padded = np.pad(static, ((span, span), (0, 0)), mode="edge")
    num = np.zeros_like(static)
    for theta in range(1, span + 1):
        num += theta * (padded[span + theta : span + theta + len(static)] -
                        padded[span - theta : span - theta + len(static)])
    return num / (2.0 * sum(t * t for t in range(1, span + 1)))


def mfcc(samples: np.ndarray, config: MfccConfig | None = None) -> np.ndarray:
    if config is None:
        config = MfccConfig()
    x = np.asarray(samples, dtype=np.float64)
    flen, shift = config.frame_len, config.frame_shift
    if len(x) < flen:
        raise AudioError(f"audio shorter than one frame ({len(x)} < {flen} samples)")
    emph = np.concatenate([x[:1], x[1:] - config.pre_emphasis * x[:-1]])
    n_frames = 1 + (len(x) - flen) // shift
    idx = np.arange(flen)[None, :] + shift * np.arange(n_frames)[:, None]
    frames = emph[idx]

    energy = np.log(np.maximum(np.sum(frames * frames, axis=1), 1e-12))
    n_fft = 1 << int(np.ceil(np.log2(flen)))
    spectrum = np.abs(np.fft.rfft(frames * np.hamming(flen), n=n_fft))
    bank = mel_filterbank(config.n_filters, n_fft, config.sample_rate)
    logmel = np.log(np.maximum(spectrum @ bank.T, 1e-10))
    ceps = dct(logmel, type=2, norm="ortho", axis=1)[:, 1 : config.n_ceps + 1]

    static = np.column_stack([ceps, energy])
    d1 = _deltas(static, config.delta_span)
    d2 = _deltas(d1, config.delta_delta_span)
    out = np.column_stack([static, d1, d2])
    assert out.shape == (n_frames, 39)
    return out


@dataclass
class DiagGmm:
    weights: np.ndarray  # (M,)
    means: np.ndarray  # (M, d)
    variances: np.ndarray  # (M, d)

    @property
    def n_components(self) -> int:
        return len(self.weights)


def _log_gauss(X: np.ndarray, gmm: DiagGmm) -> np.ndarray:
    """Per-frame, per-component log densities plus log weights: (n, M)."""
    const = -0.5 * np.sum(np.log(2.0 * np.pi * gmm.variances), axis=1)
    ll = np.empty((X.shape[0], gmm.n_components))
    for k in range(gmm.n_components):
        diff = X - gmm.means[k]
        ll[:, k] = const[k] - 0.5 * np.sum(diff * diff / gmm.variances[k], axis=1)
    return ll + np.log(gmm.weights)


def average_log_likelihood(X: np.ndarray, gmm: DiagGmm) -> float:
    return float(np.mean(logsumexp(_log_gauss(X, gmm), axis=1)))


def train_ubm(
    frames: np.ndarray,
    n_components: int = 16,
    seed: int = 0,
    max_iter: int = 50,
    tol: float = 1e-4,
) -> DiagGmm:
    X = as_float_matrix(frames, "frames")
    n, d = X.shape
    M = n_components
    if n < 10 * M:
        raise AudioError(f"need at least {10 * M} frames to train {M} components, got {n}")
    floor = 1e-4 * np.maximum(X.var(axis=0), 1e-12)

    centers = kmeans_fit(X, M, seed=seed, max_iter=20).centers
    gmm = DiagGmm(
        weights=np.full(M, 1.0 / M),
        means=centers.copy(),
        variances=np.tile(np.maximum(X.var(axis=0), floor), (M, 1)),
    )
    prev_ll = -np.inf
    for _ in range(max_iter):
        log_joint = _log_gauss(X, gmm)
        norm = logsumexp(log_joint, axis=1)
        ll = float(np.mean(norm))
        resp = np.exp(log_joint - norm[:, None])
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-10)
        means = (resp.T @ X) / nk[:, None]
        var = (resp.T @ (X * X)) / nk[:, None] - means * means
        gmm = DiagGmm(
            weights=nk / nk.sum(),
            means=means,
            variances=np.maximum(var, floor),
        )
        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll
    return gmm


def map_adapt(ubm: DiagGmm, frames: np.ndarray, relevance: float = 16.0) -> DiagGmm:
    """Mean-only adaptation; weights and variances stay at the prior."""
    if relevance <= 0:
        raise AudioError("relevance factor must be positive")
    X = as_float_matrix(frames, "frames")
    log_joint = _log_gauss(X, ubm)
    resp = np.exp(log_joint - logsumexp(log_joint, axis=1)[:, None])
    nk = resp.sum(axis=0)
    moments = resp.T @ X
    ex = np.where(nk[:, None] > 0, moments / np.maximum(nk, 1e-300)[:, None], ubm.means)
    alpha = (nk / (nk + relevance))[:, None]
    means = alpha * ex + (1.0 - alpha) * ubm.means
    return DiagGmm(weights=ubm.weights.copy(), means=means, variances=ubm.variances.copy())


def supervector(gmm: DiagGmm) -> np.ndarray:
    """Component-order concatenation of the mean vectors."""
    return gmm.means.reshape(-1).copy()
