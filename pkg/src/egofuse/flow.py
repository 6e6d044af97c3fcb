"""Dense two-frame optical flow via quadratic polynomial expansion.

Each neighborhood is fit by weighted least squares to
``f(x, y) ~ c + b.[x, y] + [x, y].A.[x, y]`` with a separable Gaussian
weight; displacement follows from how the fitted coefficients move
between frames, refined coarse-to-fine over an image pyramid with
iterative warping.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage


class FlowError(ValueError):
    pass


@dataclass(frozen=True)
class FlowParams:
    pyramid_levels: int = 3
    pyramid_scale: float = 0.5
    poly_window: int = 5
    poly_sigma: float = 1.1
    iterations: int = 3

    def __post_init__(self) -> None:
        if self.pyramid_levels < 1 or self.iterations < 1:
            raise FlowError("pyramid_levels and iterations must be positive")
        if not 0.0 < self.pyramid_scale < 1.0:
            raise FlowError("pyramid_scale must lie in (0, 1)")
        if self.poly_window < 5 or self.poly_window % 2 == 0:
            raise FlowError("poly_window must be an odd integer >= 5")
        if self.poly_sigma <= 0:
            raise FlowError("poly_sigma must be positive")


@dataclass
class FlowField:
    u: np.ndarray  # horizontal displacement, pixels/frame
    v: np.ndarray  # vertical displacement

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)


_REG = 1e-3  # diagonal loading of the normal equations; flat patches give zero flow


def _poly_expand(image: np.ndarray, window: int, sigma: float) -> np.ndarray:
    """Per-pixel quadratic fit coefficients, shape (H, W, 6).

    Coefficient order: [c, bx, by, axx, ayy, axy] for the model
    c + bx*x + by*y + axx*x^2 + ayy*y^2 + axy*x*y with x along columns.
    """
    k = window // 2
    t = np.arange(-k, k + 1, dtype=np.float64)
    a = np.exp(-(t * t) / (2.0 * sigma * sigma))

    # basis over the window as products of 1-D factors (x along columns)
    ones = np.ones_like(t)
    fx = {"1": ones, "x": t, "x2": t * t}
    # weighted basis Gram matrix G = B^T W B computed from the explicit window
    names = [("1", "1"), ("x", "1"), ("1", "x"), ("x2", "1"), ("1", "x2"), ("x", "x")]
    wy = a[:, None]
    wx = a[None, :]
    w2d = wy * wx
    basis = [fx[cx][None, :] * fx[cy][:, None] for cx, cy in names]
    B = np.stack([b.ravel() for b in basis], axis=1)
    G = B.T @ (w2d.ravel()[:, None] * B)
    G = G + _REG * np.eye(6)
    Ginv = np.linalg.inv(G)

    # B^T W f via separable correlations, one per basis function
    proj = np.empty(image.shape + (6,))
    for j, (cx, cy) in enumerate(names):
        tmp = ndimage.correlate1d(image, a * fx[cy], axis=0, mode="nearest")
        proj[:, :, j] = ndimage.correlate1d(tmp, a * fx[cx], axis=1, mode="nearest")
    return proj @ Ginv.T


def _resize(image: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    h2, w2 = shape
    h1, w1 = image.shape
    if (h1, w1) == (h2, w2):
        return image.copy()
    ys = np.linspace(0.0, h1 - 1.0, h2)
    xs = np.linspace(0.0, w1 - 1.0, w2)
    grid = np.meshgrid(ys, xs, indexing="ij")
    return ndimage.map_coordinates(image, grid, order=1, mode="nearest")


def _pyramid_shapes(shape: tuple[int, int], params: FlowParams) -> list[tuple[int, int]]:
    shapes = [shape]
    for level in range(1, params.pyramid_levels):
        s = params.pyramid_scale**level
        h = int(round(shape[0] * s))
        w = int(round(shape[1] * s))
        if min(h, w) < 2 * params.poly_window + 1:
            break
        shapes.append((h, w))
    return shapes  # index 0 = finest


def _smooth_downscale(image: np.ndarray, shape: tuple[int, int], scale: float) -> np.ndarray:
    sigma = (1.0 / scale) / 3.0
    return _resize(ndimage.gaussian_filter(image, sigma, mode="nearest"), shape)


def _update_flow(
    coef1: np.ndarray,
    coef2: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    avg_sigma: float,
) -> tuple[np.ndarray, np.ndarray]:
    h, w = u.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    coords = [yy + v, xx + u]
    warped = np.empty_like(coef2)
    for j in range(6):
        warped[:, :, j] = ndimage.map_coordinates(coef2[:, :, j], coords, order=1, mode="nearest")

    # A = mean of the two quadratic terms, db = -(b2w - b1)/2 + A d
    axx = 0.5 * (coef1[:, :, 3] + warped[:, :, 3])
    ayy = 0.5 * (coef1[:, :, 4] + warped[:, :, 4])
    axy = 0.25 * (coef1[:, :, 5] + warped[:, :, 5])  # off-diagonal of A is axy/2
    dbx = -0.5 * (warped[:, :, 1] - coef1[:, :, 1]) + axx * u + axy * v
    dby = -0.5 * (warped[:, :, 2] - coef1[:, :, 2]) + axy * u + ayy * v

    m11 = axx * axx + axy * axy
    m12 = axx * axy + axy * ayy
    m22 = axy * axy + ayy * ayy
    r1 = axx * dbx + axy * dby
    r2 = axy * dbx + ayy * dby
    blur = lambda im: ndimage.gaussian_filter(im, avg_sigma, mode="nearest")
    m11, m12, m22, r1, r2 = map(blur, (m11, m12, m22, r1, r2))

    m11 = m11 + _REG
    m22 = m22 + _REG
    det = m11 * m22 - m12 * m12
    return (m22 * r1 - m12 * r2) / det, (m11 * r2 - m12 * r1) / det


def _check_frame(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or min(image.shape) < 16:
        raise FlowError("frames must be 2-D and at least 16x16")
    return image


def _expansion_pyramid(
    image: np.ndarray, shapes: list[tuple[int, int]], params: FlowParams
) -> list[np.ndarray]:
    coefs = []
    for level, shape in enumerate(shapes):
        if level == 0:
            p = image
        else:
            p = _smooth_downscale(image, shape, params.pyramid_scale**level)
        coefs.append(_poly_expand(p, params.poly_window, params.poly_sigma))
    return coefs  # index 0 = finest


def _flow_from_pyramids(
    coefs1: list[np.ndarray],
    coefs2: list[np.ndarray],
    shapes: list[tuple[int, int]],
    params: FlowParams,
) -> FlowField:
    avg_sigma = float(params.poly_window)
    u = v = None
    for level in reversed(range(len(shapes))):
        shape = shapes[level]
        if u is None:
            u = np.zeros(shape)
            v = np.zeros(shape)
        else:
            ru = shape[1] / u.shape[1]
            rv = shape[0] / u.shape[0]
            u = _resize(u, shape) * ru
            v = _resize(v, shape) * rv
        for _ in range(params.iterations):
            u, v = _update_flow(coefs1[level], coefs2[level], u, v, avg_sigma)

    k = params.poly_window // 2
    u = np.pad(u[k:-k, k:-k], k, mode="edge")
    v = np.pad(v[k:-k, k:-k], k, mode="edge")
    return FlowField(u=u, v=v)


def farneback_flow(prev: np.ndarray, next_: np.ndarray, params: FlowParams | None = None) -> FlowField:
    """Displacement field mapping prev onto next (pixels/frame)."""
    if params is None:
        params = FlowParams()
    prev = _check_frame(prev)
    next_ = _check_frame(next_)
    if prev.shape != next_.shape:
        raise FlowError(f"frame size mismatch: {prev.shape} vs {next_.shape}")
    shapes = _pyramid_shapes(prev.shape, params)
    return _flow_from_pyramids(
        _expansion_pyramid(prev, shapes, params),
        _expansion_pyramid(next_, shapes, params),
        shapes,
        params,
    )


def flow_sequence(frames: np.ndarray, params: FlowParams | None = None) -> list[FlowField]:
    """Flows for every consecutive frame pair of a (T, H, W) stack.

    Each frame's expansion coefficients are computed once and shared by
    the two pairs that touch it, matching pairwise results exactly.
    """
    if params is None:
        params = FlowParams()
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 3 or frames.shape[0] < 2:
        raise FlowError("need a (T, H, W) stack with T >= 2")
    _check_frame(frames[0])
    shapes = _pyramid_shapes(frames[0].shape, params)
    prev = _expansion_pyramid(frames[0], shapes, params)
    flows = []
    for t in range(1, frames.shape[0]):
        nxt = _expansion_pyramid(frames[t], shapes, params)
        flows.append(_flow_from_pyramids(prev, nxt, shapes, params))
        prev = nxt
    return flows


FLOW_MAGIC = b"FLW1"


def write_flow_file(path: str | Path, flows: list[FlowField]) -> None:
    """Concatenated records: magic, u32 height, u32 width, u then v as float32."""
    import struct

    parts = []
    for f in flows:
        parts.append(FLOW_MAGIC)
        parts.append(struct.pack("<II", f.height, f.width))
        parts.append(f.u.astype("<f4").tobytes())
        parts.append(f.v.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_flow_file(path: str | Path) -> list[FlowField]:
    import struct

    data = Path(path).read_bytes()
    pos = 0
    flows: list[FlowField] = []
    while pos < len(data):
        if data[pos : pos + 4] != FLOW_MAGIC:
            raise FlowError(f"{path}: bad flow record magic at byte {pos}")
        pos += 4
        if pos + 8 > len(data):
            raise FlowError(f"{path}: truncated flow record header")
        h, w = struct.unpack_from("<II", data, pos)
        pos += 8
        count = h * w * 4
        if pos + 2 * count > len(data):
            raise FlowError(f"{path}: truncated flow record payload")
        u = np.frombuffer(data[pos : pos + count], dtype="<f4").reshape(h, w).astype(np.float64)
        pos += count
        v = np.frombuffer(data[pos : pos + count], dtype="<f4").reshape(h, w).astype(np.float64)
        pos += count
        flows.append(FlowField(u=u, v=v))
    return flows
