"""Constant-velocity box filter, track lifecycle and camera-motion compensation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, TransitionError
from .geometry import CameraIntrinsics, RigidTransform, reproject_point

STD_WEIGHT_POSITION = 1.0 / 20
STD_WEIGHT_VELOCITY = 1.0 / 160


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixels, top-left / bottom-right corners."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        vals = (self.x0, self.y0, self.x1, self.y1)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgumentError(f"box coordinates must be finite: {vals}")
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise InvalidArgumentError(f"box corners out of order: {vals}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def to_xyah(self) -> np.ndarray:
        """Centre x, centre y, aspect ratio (w/h), height."""
        h = self.height
        return np.array([(self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2,
                         self.width / h, h])

    @classmethod
    def from_xyah(cls, xyah) -> BBox:
        cx, cy, a, h = (float(v) for v in xyah[:4])
        w = a * h
        return cls(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)

    def to_tlwh(self):
        return self.x0, self.y0, self.width, self.height

    @classmethod
    def from_tlwh(cls, x, y, w, h) -> BBox:
        return cls(x, y, x + w, y + h)

    def as_array(self) -> np.ndarray:
        return np.array([self.x0, self.y0, self.x1, self.y1])


@dataclass(eq=False)
class KalmanState:
    mean: np.ndarray        # (cx, cy, a, h, vcx, vcy, va, vh)
    covariance: np.ndarray  # 8x8

    def box(self) -> BBox:
        cx, cy, a, h = self.mean[:4]
        return BBox.from_xyah((cx, cy, max(a, 1e-6), max(h, 1e-6)))

    def copy(self) -> KalmanState:
        return KalmanState(self.mean.copy(), self.covariance.copy())


_ndim = 4
_motion_mat = np.eye(2 * _ndim)
for _i in range(_ndim):
    _motion_mat[_i, _ndim + _i] = 1.0
_update_mat = np.eye(_ndim, 2 * _ndim)


def _check_box(box: BBox):
    if box.width <= 0 or box.height <= 0:
        raise InvalidArgumentError(f"box must have positive area: {box}")


def kf_initiate(box: BBox) -> KalmanState:
    _check_box(box)
    mean_pos = box.to_xyah()
    mean = np.r_[mean_pos, np.zeros(_ndim)]
    h = mean_pos[3]
    std = [2 * STD_WEIGHT_POSITION * h, 2 * STD_WEIGHT_POSITION * h, 1e-2,
           2 * STD_WEIGHT_POSITION * h, 10 * STD_WEIGHT_VELOCITY * h,
           10 * STD_WEIGHT_VELOCITY * h, 1e-5, 10 * STD_WEIGHT_VELOCITY * h]
    return KalmanState(mean, np.diag(np.square(std)))


def kf_predict(s: KalmanState) -> KalmanState:
    h = s.mean[3]
    std_pos = [STD_WEIGHT_POSITION * h, STD_WEIGHT_POSITION * h, 1e-2,
               STD_WEIGHT_POSITION * h]
    std_vel = [STD_WEIGHT_VELOCITY * h, STD_WEIGHT_VELOCITY * h, 1e-5,
               STD_WEIGHT_VELOCITY * h]
    q = np.diag(np.square(np.r_[std_pos, std_vel]))
    mean = _motion_mat @ s.mean
    cov = _motion_mat @ s.covariance @ _motion_mat.T + q
    return KalmanState(mean, (cov + cov.T) / 2)


def kf_update(s: KalmanState, box: BBox) -> KalmanState:
    _check_box(box)
    z = box.to_xyah()
    h = s.mean[3]
    std = [STD_WEIGHT_POSITION * h, STD_WEIGHT_POSITION * h, 1e-1,
           STD_WEIGHT_POSITION * h]
    proj_mean = _update_mat @ s.mean
    proj_cov = _update_mat @ s.covariance @ _update_mat.T + np.diag(np.square(std))
    chol = scipy.linalg.cho_factor(proj_cov, lower=True, check_finite=False)
    gain = scipy.linalg.cho_solve(chol, (s.covariance @ _update_mat.T).T,
                                  check_finite=False).T
    mean = s.mean + gain @ (z - proj_mean)
    cov = s.covariance - gain @ proj_cov @ gain.T
    return KalmanState(mean, (cov + cov.T) / 2)


def compensate_box(box: BBox, depth: float, k: CameraIntrinsics,
                   t: RigidTransform) -> BBox:
    """Move a predicted box by the camera motion ``t`` at metric ``depth``.

    Only the two bottom corners are reprojected; the box keeps its height. If
    either corner falls behind the camera the box is returned unchanged.
    """
    if not depth > 0:
        raise InvalidArgumentError(f"depth must be positive, got {depth}")
    if not t.tau.any() and np.array_equal(t.r, np.eye(3)):
        return box
    ul, vl, zl = reproject_point(box.x0, box.y1, depth, k, t)
    ur, vr, zr = reproject_point(box.x1, box.y1, depth, k, t)
    if zl <= 0 or zr <= 0:
        return box
    y1 = (vl + vr) / 2
    return BBox(min(ul, ur), y1 - box.height, max(ul, ur), y1)


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    ACTIVE = "active"
    LOST = "lost"
    REMOVED = "removed"


_ALLOWED = {
    (TrackStatus.TENTATIVE, TrackStatus.ACTIVE),
    (TrackStatus.ACTIVE, TrackStatus.LOST),
    (TrackStatus.LOST, TrackStatus.ACTIVE),
    (TrackStatus.TENTATIVE, TrackStatus.REMOVED),
    (TrackStatus.LOST, TrackStatus.REMOVED),
}


@dataclass(eq=False)
class Track:
    id: int
    state: KalmanState
    status: TrackStatus = TrackStatus.TENTATIVE
    hits: int = 1
    misses: int = 0
    depth: float | None = None

    def transition(self, new: TrackStatus):
        if new is self.status:
            return
        if (self.status, new) not in _ALLOWED:
            raise TransitionError(f"track {self.id}: {self.status.value} -> {new.value}")
        self.status = new

    @property
    def box(self) -> BBox:
        return self.state.box()
