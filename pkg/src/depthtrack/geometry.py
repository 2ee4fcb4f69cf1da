"""Pinhole camera model, rigid transforms and pixel reprojection.

Conventions used throughout the package:

* camera frame: x right, y down, z forward (optical axis);
* pixel (0, 0) is the centre of the top-left pixel, u grows rightward and
  v grows downward, so ``image[v, u]`` indexes the array;
* a :class:`Pose6DoF` maps to ``R = Rz(theta_z) @ Ry(theta_y) @ Rx(theta_x)``
  and a transform acts on points as ``X' = R @ X + tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

DEFAULT_D_MIN = 0.1
DEFAULT_D_MAX = 100.0


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgumentError(f"intrinsics must be finite, got {vals}")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidArgumentError("focal lengths must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def downscaled(self, factor: int = 2) -> CameraIntrinsics:
        """Intrinsics of an image reduced by ``factor`` via block averaging.

        With pixel centres at integer coordinates, coarse pixel ``u'`` covers
        fine pixels centred on ``factor*u' + (factor-1)/2``.
        """
        off = (factor - 1) / 2.0
        return CameraIntrinsics(self.fx / factor, self.fy / factor,
                                (self.cx - off) / factor, (self.cy - off) / factor)


@dataclass(frozen=True)
class Pose6DoF:
    """Camera motion as three Euler angles (radians) and a translation."""

    theta_x: float = 0.0
    theta_y: float = 0.0
    theta_z: float = 0.0
    t_x: float = 0.0
    t_y: float = 0.0
    t_z: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.theta_x, self.theta_y, self.theta_z,
                         self.t_x, self.t_y, self.t_z], dtype=float)

    @classmethod
    def from_array(cls, values) -> Pose6DoF:
        v = [float(x) for x in values]
        if len(v) != 6:
            raise InvalidArgumentError(f"pose needs 6 values, got {len(v)}")
        return cls(*v)

    @property
    def rotation(self) -> np.ndarray:
        return np.array([self.theta_x, self.theta_y, self.theta_z])

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.t_x, self.t_y, self.t_z])


@dataclass(frozen=True, eq=False)
class RigidTransform:
    r: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        tau = np.asarray(self.tau, dtype=float).reshape(3)
        if r.shape != (3, 3):
            raise InvalidArgumentError("rotation must be 3x3")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "tau", tau)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(tau))):
            raise InvalidArgumentError("transform entries must be finite")
        if not self.is_valid():
            raise InvalidArgumentError("r is not a proper rotation (need r^T r = I, det r = 1)")

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points stored along the last axis (shape ``(..., 3)``)."""
        return points @ self.r.T + self.tau

    def inverse(self) -> RigidTransform:
        rt = self.r.T
        return RigidTransform(rt, -rt @ self.tau)

    def compose(self, other: RigidTransform) -> RigidTransform:
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        return RigidTransform(self.r @ other.r, self.r @ other.tau + self.tau)

    def is_valid(self, tol: float = 1e-9) -> bool:
        return (np.allclose(self.r.T @ self.r, np.eye(3), atol=tol)
                and abs(np.linalg.det(self.r) - 1.0) <= tol)


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def pose_to_transform(p: Pose6DoF) -> RigidTransform:
    v = p.as_array()
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError(f"pose components must be finite, got {v}")
    tx, ty, tz = p.theta_x, p.theta_y, p.theta_z
    cx, sx = math.cos(tx), math.sin(tx)
    cy, sy = math.cos(ty), math.sin(ty)
    cz, sz = math.cos(tz), math.sin(tz)
    # closed form of Rz @ Ry @ Rx
    r = np.array([
        [cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx],
        [sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx],
        [-sy, cy * sx, cy * cx],
    ])
    return RigidTransform(r, v[3:].copy())


def transform_to_pose(t: RigidTransform) -> Pose6DoF:
    """Inverse of :func:`pose_to_transform` (theta_y restricted to [-pi/2, pi/2])."""
    r = t.r
    theta_y = -math.asin(max(-1.0, min(1.0, r[2, 0])))
    theta_x = math.atan2(r[2, 1], r[2, 2])
    theta_z = math.atan2(r[1, 0], r[0, 0])
    return Pose6DoF(theta_x, theta_y, theta_z, *map(float, t.tau))


def backproject(u, v, depth, k: CameraIntrinsics) -> np.ndarray:
    """Camera-frame points for pixels ``(u, v)`` at z-depth ``depth``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    z = np.asarray(depth, dtype=float)
    x = (u - k.cx) / k.fx * z
    y = (v - k.cy) / k.fy * z
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def project(points: np.ndarray, k: CameraIntrinsics):
    """Pixel coordinates and z of camera-frame points; z <= 0 gives nan pixels."""
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        zs = np.where(z > 0, z, np.nan)
        u = k.fx * x / zs + k.cx
        v = k.fy * y / zs + k.cy
    return u, v, z


def reproject_points(u, v, depth, k: CameraIntrinsics, t: RigidTransform):
    """Vectorised :func:`reproject_point` without argument checks."""
    pts = t.apply(backproject(u, v, depth, k))
    return project(pts, k)


def reproject_point(u: float, v: float, depth: float, k: CameraIntrinsics,
                    t: RigidTransform) -> tuple[float, float, float]:
    """Move pixel ``(u, v)`` seen at ``depth`` into the camera described by ``t``.

    Returns sub-pixel ``(u', v', depth')``. When the point lands behind the new
    camera ``depth' <= 0`` and the pixel coordinates are nan.
    """
    if not (depth > 0) or not math.isfinite(depth):
        raise InvalidArgumentError(f"depth must be positive and finite, got {depth}")
    x = (u - k.cx) / k.fx * depth
    y = (v - k.cy) / k.fy * depth
    px, py, pz = t.r @ np.array([x, y, depth]) + t.tau
    if pz <= 0:
        return math.nan, math.nan, float(pz)
    return (float(k.fx * px / pz + k.cx), float(k.fy * py / pz + k.cy), float(pz))


def _check_depth_range(d_min, d_max):
    if not (0 < d_min < d_max) or not math.isfinite(d_max):
        raise InvalidArgumentError(f"need 0 < d_min < d_max, got {d_min}, {d_max}")


def disparity_to_depth(d, d_min: float = DEFAULT_D_MIN, d_max: float = DEFAULT_D_MAX):
    """Metric depth from a normalised disparity in [0, 1].

    Accepts a scalar or an array; a scalar input returns a float.
    """
    _check_depth_range(d_min, d_max)
    arr = np.asarray(d, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise InvalidArgumentError("disparity must lie in [0, 1]")
    out = 1.0 / (1.0 / d_max + (1.0 / d_min - 1.0 / d_max) * arr)
    # pin the endpoints so d=0 and d=1 map exactly to the bounds
    out = np.where(arr == 0, d_max, np.where(arr == 1, d_min, out))
    return float(out) if out.ndim == 0 else out


def depth_to_disparity(z, d_min: float = DEFAULT_D_MIN, d_max: float = DEFAULT_D_MAX):
    """Inverse of :func:`disparity_to_depth`; depths are clipped to [d_min, d_max]."""
    _check_depth_range(d_min, d_max)
    z = np.clip(np.asarray(z, dtype=float), d_min, d_max)
    d = (1.0 / z - 1.0 / d_max) / (1.0 / d_min - 1.0 / d_max)
    d = np.clip(d, 0.0, 1.0)
    return float(d) if d.ndim == 0 else d
