"""Synthetic four-class audio-visual corpus for end-to-end checks.

Each class couples a distinctive motion with a distinctive soundtrack:
rightward pan with a 440 Hz tone, leftward pan with an 880 Hz tone,
zoom-in with white noise, and a static scene with silence. Textures are
periodic smoothed noise so translation can be applied as an exact
Fourier phase ramp with no border artifacts.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from .audio import write_wav
from .frames import write_pgm
from .manifest import DatasetManifest, SegmentRecord, load_manifest, write_manifest

CLASS_NAMES = ("pan_right", "pan_left", "zoom_in", "static")
N_SEGMENTS_PER_CLASS = 12
N_FRAMES = 45
FRAME_SHAPE = (120, 160)
FRAME_RATE = 15.0
AUDIO_RATE = 48000
AUDIO_SECONDS = 1.5


def periodic_texture(shape, rng, sigma=6.0, lo=40.0, hi=215.0) -> np.ndarray:
    noise = rng.standard_normal(shape)
    tex = gaussian_filter(noise, sigma=sigma, mode="wrap")
    tex = tex - tex.min()
    peak = tex.max()
    if peak > 0:
        tex = tex / peak
    return lo + (hi - lo) * tex


def translate_periodic(texture: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Shift content by (dx right, dy down) with wrap-around."""
    h, w = texture.shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    spectrum = np.fft.rfft2(texture)
    ramp = np.exp(-2j * np.pi * (fx * dx + fy * dy))
    return np.fft.irfft2(spectrum * ramp, s=texture.shape)


def zoom_frame(texture: np.ndarray, scale: float) -> np.ndarray:
    """Content magnified by `scale` about the frame centre."""
    h, w = texture.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    coords = np.stack([(yy - cy) / scale + cy, (xx - cx) / scale + cx])
    return map_coordinates(texture, coords, order=1, mode="wrap")


def _render_frames(label: int, rng) -> np.ndarray:
    texture = periodic_texture(FRAME_SHAPE, rng)
    jitter = rng.uniform(0.9, 1.1)
    frames = np.empty((N_FRAMES,) + FRAME_SHAPE)
    if label == 0:  # rightward pan, about 2 px per frame
        dx = 2.0 * jitter
        for t in range(N_FRAMES):
            frames[t] = translate_periodic(texture, dx * t, 0.0)
    elif label == 1:  # leftward pan, about 3 px per frame
        dx = -3.0 * jitter
        for t in range(N_FRAMES):
            frames[t] = translate_periodic(texture, dx * t, 0.0)
    elif label == 2:  # zoom in, about 1% per frame
        rate = 1.0 + 0.01 * jitter
        for t in range(N_FRAMES):
            frames[t] = zoom_frame(texture, rate**t)
    else:  # static scene
        frames[:] = texture
    return frames


def _render_audio(label: int, rng) -> np.ndarray:
    n = int(AUDIO_RATE * AUDIO_SECONDS)
    t = np.arange(n) / AUDIO_RATE
    if label == 0:
        return 0.5 * rng.uniform(0.9, 1.1) * np.sin(2 * np.pi * 440.0 * t + rng.uniform(0, 2 * np.pi))
    if label == 1:
        return 0.5 * rng.uniform(0.9, 1.1) * np.sin(2 * np.pi * 880.0 * t + rng.uniform(0, 2 * np.pi))
    if label == 2:
        return 0.2 * rng.standard_normal(n)
    return np.zeros(n)


def synth_dataset(seed: int, out_dir: str | Path) -> DatasetManifest:
    """Write the full corpus under out_dir and return its manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    segments = []
    for label, cname in enumerate(CLASS_NAMES):
        for idx in range(N_SEGMENTS_PER_CLASS):
            rng = np.random.default_rng(np.random.SeedSequence((seed, label, idx)))
            seg_id = f"{cname}_{idx:02d}"
            frame_dir = out / seg_id
            frame_dir.mkdir(exist_ok=True)
            frames = _render_frames(label, rng)
            for t in range(N_FRAMES):
                write_pgm(frame_dir / f"frame_{t:04d}.pgm", frames[t])
            wav_path = out / f"{seg_id}.wav"
            write_wav(wav_path, _render_audio(label, rng), AUDIO_RATE)
            segments.append(
                SegmentRecord(
                    segment_id=seg_id,
                    label=label,
                    frame_dir=seg_id,
                    frame_rate=FRAME_RATE,
                    audio_path=f"{seg_id}.wav",
                )
            )
    manifest = DatasetManifest(class_names=list(CLASS_NAMES), segments=segments)
    write_manifest(out / "manifest.tsv", manifest)
    # reload so callers get paths resolved against the corpus directory
    return load_manifest(out / "manifest.tsv")
