"""Binary PGM (P5) frame I/O and frame-sequence loading."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np


class FrameError(ValueError):
    pass


def _read_header_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comment lines
    while pos < len(data):
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise FrameError("truncated PGM header")
    return data[start:pos], pos


def read_pgm(path: str | Path) -> np.ndarray:
    """Read an 8-bit binary PGM file into a float64 (H, W) array."""
    data = Path(path).read_bytes()
    magic, pos = _read_header_token(data, 0)
    if magic != b"P5":
        raise FrameError(f"{path}: not a binary PGM (P5) file")
    width, pos = _read_header_token(data, pos)
    height, pos = _read_header_token(data, pos)
    maxval, pos = _read_header_token(data, pos)
    if not (width.isdigit() and height.isdigit() and maxval.isdigit()):
        raise FrameError(f"{path}: malformed PGM header")
    w, h, mv = int(width), int(height), int(maxval)
    if mv <= 0 or mv > 255:
        raise FrameError(f"{path}: unsupported maxval {mv} (8-bit only)")
    pos += 1  # single whitespace byte before the raster
    raster = data[pos : pos + w * h]
    if len(raster) < w * h:
        raise FrameError(f"{path}: truncated PGM raster")
    img = np.frombuffer(raster, dtype=np.uint8).reshape(h, w)
    return img.astype(np.float64)


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """Write a (H, W) array as 8-bit binary PGM; values are clipped to [0, 255]."""
    img = np.clip(np.asarray(image), 0, 255).astype(np.uint8)
    if img.ndim != 2:
        raise FrameError("PGM image must be 2-D")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(img.tobytes())


def list_frame_files(frame_dir: str | Path) -> list[Path]:
    """Lexicographically ordered .pgm files in a segment's frame directory."""
    d = Path(frame_dir)
    if not d.is_dir():
        raise FrameError(f"unreadable frame directory: {d}")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() == ".pgm")
    if not files:
        raise FrameError(f"no PGM frames in {d}")
    return files


def load_frames(frame_dir: str | Path) -> np.ndarray:
    """Load all frames of a segment as a (T, H, W) float64 stack."""
    files = list_frame_files(frame_dir)
    frames = [read_pgm(f) for f in files]
    shape = frames[0].shape
    for f, arr in zip(files, frames):
        if arr.shape != shape:
            raise FrameError(f"{f}: frame size {arr.shape} differs from {shape}")
    return np.stack(frames)


_ID_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


def valid_id(segment_id: str) -> bool:
    return bool(_ID_RE.match(segment_id))
