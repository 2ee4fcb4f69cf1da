"""Direct photometric recovery of inter-frame camera motion.

The pose is found by minimising the mean photometric error between a target
frame and the view synthesised from a source frame through the target's
disparity grid. A coarse-to-fine pyramid feeds a derivative-free simplex
search at each level.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateInputError, InvalidArgumentError, UnreliablePoseError
from .geometry import (DEFAULT_D_MAX, DEFAULT_D_MIN, CameraIntrinsics, Pose6DoF,
                       backproject, disparity_to_depth, pose_to_transform)
from .imaging import DEFAULT_ALPHA, _warp_xyz, as_grid, photometric_error

log = logging.getLogger(__name__)

MIN_VALID_FRACTION = 0.25
TEXTURE_VAR_FLOOR = 1e-8
# initial simplex step per parameter: radians for the angles, scene units for t
SIMPLEX_SCALE = np.array([0.01, 0.01, 0.01, 0.05, 0.05, 0.05])


@dataclass(frozen=True)
class AlignConfig:
    pyramid_levels: int = 3
    max_evals_per_level: int = 200
    converge_tol: float = 1e-6
    alpha: float = DEFAULT_ALPHA
    d_min: float = DEFAULT_D_MIN
    d_max: float = DEFAULT_D_MAX

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise InvalidArgumentError("pyramid_levels must be >= 1")
        if self.max_evals_per_level < 10:
            raise InvalidArgumentError("max_evals_per_level must be >= 10")
        if not self.converge_tol > 0:
            raise InvalidArgumentError("converge_tol must be > 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgumentError("alpha must lie in [0, 1]")
        if not 0 < self.d_min < self.d_max:
            raise InvalidArgumentError("need 0 < d_min < d_max")


@dataclass
class PoseEstimate:
    pose: Pose6DoF
    residual: float
    valid_fraction: float
    #: best objective value after every evaluation, one list per pyramid level
    #: (coarsest first)
    trace: list = field(default_factory=list, repr=False)


class _Level:
    """One pyramid level with the target's back-projected points cached."""

    def __init__(self, source, target, target_depth, k, cfg):
        self.source = source
        self.target = target
        self.k = k
        self.alpha = cfg.alpha
        h, w = target.shape
        vv, uu = np.mgrid[0:h, 0:w]
        z = disparity_to_depth(target_depth, cfg.d_min, cfg.d_max)
        pts = backproject(uu, vv, z, k)
        self.xyz = tuple(np.ascontiguousarray(pts[..., i]) for i in range(3))

    def evaluate(self, pose: Pose6DoF):
        """Return ``(mean error, valid fraction)`` for ``pose``."""
        warped, valid = _warp_xyz(self.source, *self.xyz, self.k,
                                  pose_to_transform(pose))
        frac = float(valid.mean())
        if frac < MIN_VALID_FRACTION:
            return math.inf, frac
        # invalid pixels take the target value so they do not disturb the
        # SSIM windows of their valid neighbours
        filled = np.where(valid, warped, self.target)
        err = photometric_error(self.target, filled, self.alpha, valid)
        return err.mean(), frac


def _downsample(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    h2, w2 = h // 2, w // 2
    c = img[:2 * h2, :2 * w2]
    return (c[0::2, 0::2] + c[0::2, 1::2] + c[1::2, 0::2] + c[1::2, 1::2]) / 4.0


def _check_inputs(source, target, target_depth):
    source = as_grid(source, "source")
    target = as_grid(target, "target")
    target_depth = as_grid(target_depth, "target depth")
    if not (source.shape == target.shape == target_depth.shape):
        raise InvalidArgumentError(
            f"shape mismatch: source {source.shape}, target {target.shape}, "
            f"depth {target_depth.shape}")
    return source, target, target_depth


def photometric_objective(pose: Pose6DoF, source, target, target_depth,
                          k: CameraIntrinsics, cfg: AlignConfig = AlignConfig()) -> float:
    """Mean photometric error of the warp implied by ``pose``.

    Returns ``inf`` when fewer than a quarter of the pixels stay valid.
    """
    source, target, target_depth = _check_inputs(source, target, target_depth)
    value, _ = _Level(source, target, target_depth, k, cfg).evaluate(pose)
    return value


def _build_pyramid(source, target, target_depth, k, levels):
    pyr = [(source, target, target_depth, k)]
    for _ in range(levels - 1):
        s, t, d, kk = pyr[-1]
        if min(s.shape) < 8:
            break
        pyr.append((_downsample(s), _downsample(t), _downsample(d), kk.downscaled(2)))
    return pyr[::-1]


def _simplex_search(level: _Level, start: np.ndarray, cfg: AlignConfig):
    trace = []
    best = [math.inf]

    def f(z):
        value, _ = level.evaluate(Pose6DoF.from_array(z * SIMPLEX_SCALE))
        if value < best[0]:
            best[0] = value
        trace.append(best[0])
        return value

    z0 = start / SIMPLEX_SCALE
    simplex = np.vstack([z0, z0 + np.eye(6)])
    res = minimize(f, z0, method="Nelder-Mead",
                   options={"initial_simplex": simplex,
                            "maxfev": cfg.max_evals_per_level,
                            "fatol": cfg.converge_tol,
                            "xatol": 1e-3})
    x = res.x * SIMPLEX_SCALE
    return x, float(res.fun), trace


def estimate_pose(source, target, target_depth, k: CameraIntrinsics,
                  cfg: AlignConfig = AlignConfig()) -> PoseEstimate:
    """Recover the transform taking target-camera points into the source camera.

    With ``source`` = frame t and ``target`` = frame t-1 (plus the disparity
    of frame t-1) this is the camera motion from t-1 to t.
    """
    source, target, target_depth = _check_inputs(source, target, target_depth)
    if source.var() < TEXTURE_VAR_FLOOR or target.var() < TEXTURE_VAR_FLOOR:
        raise DegenerateInputError("textureless input: image variance below 1e-8")

    x = np.zeros(6)
    traces = []
    for s, t, d, kk in _build_pyramid(source, target, target_depth, k, cfg.pyramid_levels):
        level = _Level(s, t, d, kk, cfg)
        x, value, trace = _simplex_search(level, x, cfg)
        traces.append(trace)
        log.debug("level %dx%d: objective %.6g after %d evals",
                  s.shape[1], s.shape[0], value, len(trace))

    pose = Pose6DoF.from_array(x)
    residual, frac = level.evaluate(pose)
    if frac < MIN_VALID_FRACTION:
        raise UnreliablePoseError(
            f"valid overlap {frac:.3f} below {MIN_VALID_FRACTION}", valid_fraction=frac)
    return PoseEstimate(pose, residual, frac, traces)
