from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage


def smooth_texture(shape, seed=0, sigma=6.0, lo=40.0, hi=215.0):
    """Band-limited random texture, values spread over [lo, hi]."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(shape)
    img = ndimage.gaussian_filter(noise, sigma, mode="wrap")
    img = img - img.min()
    if img.max() > 0:
        img = img / img.max()
    return lo + (hi - lo) * img


def translate(img, dx, dy):
    """Periodic subpixel translation; content moves by (+dx right, +dy down)."""
    f = np.fft.fft2(img)
    return np.real(np.fft.ifft2(ndimage.fourier_shift(f, (dy, dx))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def build_mini_corpus(root: Path, n_per_class: int = 4, n_frames: int = 20,
                      shape=(36, 48), audio_seconds: float = 0.3):
    """Two-class corpus small enough for fast pipeline tests: rightward
    pan with a 600 Hz tone vs downward pan with an 1800 Hz tone."""
    from egofuse.frames import write_pgm
    from egofuse.audio import write_wav
    from egofuse.manifest import (
        DatasetManifest,
        SegmentRecord,
        load_manifest,
        write_manifest,
    )
    from egofuse.synth import periodic_texture, translate_periodic

    rate = 24000
    n_samples = int(rate * audio_seconds)
    t = np.arange(n_samples) / rate
    segments = []
    for label, cname in enumerate(("panr", "pand")):
        for idx in range(n_per_class):
            seg_rng = np.random.default_rng(np.random.SeedSequence((9, label, idx)))
            seg_id = f"{cname}_{idx:02d}"
            seg_dir = root / seg_id
            seg_dir.mkdir(parents=True, exist_ok=True)
            tex = periodic_texture(shape, seg_rng)
            speed = 1.5 * seg_rng.uniform(0.9, 1.1)
            dx, dy = (speed, 0.0) if label == 0 else (0.0, speed)
            for f in range(n_frames):
                write_pgm(seg_dir / f"f_{f:03d}.pgm",
                          translate_periodic(tex, dx * f, dy * f))
            freq = 600.0 if label == 0 else 1800.0
            tone = 0.4 * np.sin(2 * np.pi * freq * t + seg_rng.uniform(0, 2 * np.pi))
            write_wav(root / f"{seg_id}.wav", tone, rate)
            segments.append(SegmentRecord(seg_id, label, seg_id, 10.0, f"{seg_id}.wav"))
    manifest = DatasetManifest(class_names=["panr", "pand"], segments=segments)
    write_manifest(root / "manifest.tsv", manifest)
    return load_manifest(root / "manifest.tsv")


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("mini_corpus")
    return build_mini_corpus(root)


@pytest.fixture(scope="session")
def mini_table(mini_corpus, tmp_path_factory):
    from egofuse.pipeline import extract_features

    cache = tmp_path_factory.mktemp("mini_cache") / "features.egf"
    return extract_features(mini_corpus, str(cache))


