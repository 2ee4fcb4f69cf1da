"""Image-space kernels: sampling, view synthesis and photometric losses.

Images and disparity grids are plain 2-D ``float64`` arrays indexed
``[row, col]`` with values in [0, 1]. Per-pixel error maps carry an explicit
validity mask (:class:`ErrorMap`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .geometry import (DEFAULT_D_MAX, DEFAULT_D_MIN, CameraIntrinsics,
                       RigidTransform, backproject, disparity_to_depth)

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
DEFAULT_ALPHA = 0.85

#: value returned by :func:`bilinear_sample` outside the image
OUT_OF_BOUNDS = math.nan


@dataclass(eq=False)
class ErrorMap:
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.shape != self.valid.shape:
            raise InvalidArgumentError("values and validity mask differ in shape")

    @property
    def shape(self):
        return self.values.shape

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean()) if self.valid.size else 0.0

    def mean(self) -> float:
        """Mean over valid pixels (nan when none is valid)."""
        if not self.valid.any():
            return math.nan
        return float(self.values[self.valid].mean())


def as_grid(data, name="image") -> np.ndarray:
    """Validate a 2-D grid with values in [0, 1] and return it as float64."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidArgumentError(f"{name} must be a non-empty 2-D grid, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise InvalidArgumentError(f"{name} values must lie in [0, 1]")
    return arr


def to_luma(rgb) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=float)
    if rgb.ndim == 2:
        return rgb
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InvalidArgumentError(f"expected an HxWx3 colour image, got {rgb.shape}")
    # weights sum to 1 only up to rounding; keep gray pixels gray
    luma = rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114
    gray = (rgb[..., 0] == rgb[..., 1]) & (rgb[..., 1] == rgb[..., 2])
    return np.clip(np.where(gray, rgb[..., 0], luma), 0.0, 1.0)


def _same_shape(a, b, what="inputs"):
    if a.shape != b.shape:
        raise InvalidArgumentError(f"{what} differ in shape: {a.shape} vs {b.shape}")


def sample_bilinear(img: np.ndarray, x, y):
    """Vectorised bilinear sampling.

    Returns ``(values, inside)``; values are 0 where ``inside`` is False.
    """
    h, w = img.shape
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xs = np.where(inside, x, 0.0)
    ys = np.where(inside, y, 0.0)
    x0 = np.minimum(np.floor(xs).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.intp), max(h - 2, 0))
    ax = xs - x0
    ay = ys - y0
    dx = 1 if w > 1 else 0
    dy = w if h > 1 else 0
    flat = img.ravel()
    i00 = y0 * w + x0
    top = flat.take(i00) * (1 - ax) + flat.take(i00 + dx) * ax
    bot = flat.take(i00 + dy) * (1 - ax) + flat.take(i00 + dy + dx) * ax
    vals = top * (1 - ay) + bot * ay
    return np.where(inside, vals, 0.0), inside


def bilinear_sample(img, x: float, y: float) -> float:
    """Intensity at continuous ``(x, y)``, or :data:`OUT_OF_BOUNDS` (nan)."""
    img = np.asarray(img, dtype=float)
    val, inside = sample_bilinear(img, x, y)
    return float(val) if bool(inside) else OUT_OF_BOUNDS


def warp_points(source: np.ndarray, points: np.ndarray, k: CameraIntrinsics,
                t: RigidTransform):
    """Sample ``source`` at the projections of camera-frame ``points`` moved by ``t``.

    ``points`` has shape ``(..., 3)``. Points whose transformed depth is
    non-positive, or which project outside the source image, are invalid.
    """
    return _warp_xyz(source, points[..., 0], points[..., 1], points[..., 2], k, t)


def _warp_xyz(source, x, y, z, k, t):
    r, tau = t.r, t.tau
    xs = r[0, 0] * x + r[0, 1] * y + r[0, 2] * z + tau[0]
    ys = r[1, 0] * x + r[1, 1] * y + r[1, 2] * z + tau[1]
    zs = r[2, 0] * x + r[2, 1] * y + r[2, 2] * z + tau[2]
    front = zs > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(front, 1.0 / zs, 0.0)
    u = np.where(front, k.fx * xs * inv + k.cx, -1.0)
    v = np.where(front, k.fy * ys * inv + k.cy, -1.0)
    vals, inside = sample_bilinear(source, u, v)
    return vals, inside & front


def synthesize_view(source, target_depth, k: CameraIntrinsics, t: RigidTransform,
                    d_min: float = DEFAULT_D_MIN, d_max: float = DEFAULT_D_MAX):
    """Reconstruct the target frame by sampling ``source``.

    ``t`` maps target-camera coordinates into source-camera coordinates.
    Returns ``(image, valid)``; invalid pixels hold 0.
    """
    source = as_grid(source, "source")
    target_depth = as_grid(target_depth, "target depth")
    _same_shape(source, target_depth, "source and target depth")
    h, w = target_depth.shape
    z = disparity_to_depth(target_depth, d_min, d_max)
    vv, uu = np.mgrid[0:h, 0:w]
    pts = backproject(uu, vv, z, k)
    return warp_points(source, pts, k, t)


def _box3(x: np.ndarray) -> np.ndarray:
    """3x3 box mean with edge replication, summed in a fixed order."""
    p = np.pad(x, 1, mode="edge")
    h, w = x.shape
    acc = np.zeros_like(x)
    for dy in range(3):
        for dx in range(3):
            acc += p[dy:dy + h, dx:dx + w]
    return acc / 9.0


def ssim_map(a, b) -> np.ndarray:
    """Per-pixel SSIM over a 3x3 window, values in [-1, 1]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _same_shape(a, b)
    if a.ndim != 2:
        raise InvalidArgumentError("ssim_map expects 2-D images")
    mu_a = _box3(a)
    mu_b = _box3(b)
    var_a = _box3(a * a) - mu_a * mu_a
    var_b = _box3(b * b) - mu_b * mu_b
    cov = _box3(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return np.clip(num / den, -1.0, 1.0)


def photometric_error(a, b, alpha: float = DEFAULT_ALPHA, valid=None) -> ErrorMap:
    """Blend of SSIM dissimilarity and absolute difference, per pixel."""
    if not (0.0 <= alpha <= 1.0):
        raise InvalidArgumentError(f"alpha must lie in [0, 1], got {alpha}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _same_shape(a, b)
    pe = alpha / 2 * (1.0 - ssim_map(a, b)) + (1 - alpha) * np.abs(a - b)
    pe = np.maximum(pe, 0.0)
    if valid is None:
        valid = np.ones(a.shape, dtype=bool)
    return ErrorMap(pe, valid)


def min_reprojection(maps) -> ErrorMap:
    """Pixel-wise minimum over error maps, ignoring invalid entries."""
    maps = list(maps)
    if not maps:
        raise InvalidArgumentError("min_reprojection needs at least one map")
    shape = maps[0].shape
    for m in maps[1:]:
        _same_shape(maps[0].values, m.values, "error maps")
    best = np.full(shape, np.inf)
    any_valid = np.zeros(shape, dtype=bool)
    for m in maps:
        cand = np.where(m.valid, m.values, np.inf)
        best = np.minimum(best, cand)
        any_valid |= m.valid
    return ErrorMap(np.where(any_valid, best, 0.0), any_valid)


def smoothness_loss(d, i) -> float:
    """Edge-aware first-order smoothness of a disparity grid."""
    d = np.asarray(d, dtype=float)
    i = np.asarray(i, dtype=float)
    _same_shape(d, i, "depth and image")
    gx = np.zeros_like(d)
    gy = np.zeros_like(d)
    gx[:, :-1] = np.abs(np.diff(d, axis=1)) * np.exp(-np.abs(np.diff(i, axis=1)))
    gy[:-1, :] = np.abs(np.diff(d, axis=0)) * np.exp(-np.abs(np.diff(i, axis=0)))
    return float((gx + gy).mean())
