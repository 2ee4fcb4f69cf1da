"""Object depth, IoU assignment, depth-cascaded matching and the tracker loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidArgumentError
from .geometry import (DEFAULT_D_MAX, DEFAULT_D_MIN, CameraIntrinsics, Pose6DoF,
                       disparity_to_depth, pose_to_transform)
from .motion import (BBox, KalmanState, Track, TrackStatus, compensate_box,
                     kf_initiate, kf_predict, kf_update)

log = logging.getLogger(__name__)

# stands in for +inf inside the solver, which rejects infeasible matrices
_BIG = 1e9


@dataclass
class Detection:
    box: BBox
    confidence: float = 1.0
    depth: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidArgumentError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass
class MatchResult:
    matches: list
    unmatched_tracks: list
    unmatched_detections: list


def box_depth(box: BBox, d: np.ndarray, mode: str = "bottom") -> float:
    """Disparity of an object from the grid ``d``.

    ``mode="bottom"`` averages the row under the box's bottom edge (clipped to
    the image); ``mode="full"`` averages every pixel the box covers.
    """
    h, w = d.shape
    if box.x1 < 0 or box.x0 > w - 1 or box.y1 < 0 or box.y0 > h - 1:
        raise InvalidArgumentError(f"box {box} lies outside the {w}x{h} grid")
    c0 = min(max(math.ceil(box.x0), 0), w - 1)
    c1 = min(max(math.floor(box.x1), 0), w - 1)
    if c1 < c0:
        c0 = c1 = min(max(round((box.x0 + box.x1) / 2), 0), w - 1)
    r1 = min(max(math.floor(box.y1), 0), h - 1)
    if mode == "bottom":
        return float(d[r1, c0:c1 + 1].mean())
    if mode == "full":
        r0 = min(max(math.ceil(box.y0), 0), r1)
        return float(d[r0:r1 + 1, c0:c1 + 1].mean())
    raise InvalidArgumentError(f"unknown box depth mode {mode!r}")


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    a = np.array([b.as_array() for b in boxes_a]).reshape(-1, 4)
    b = np.array([x.as_array() for x in boxes_b]).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where((inter > 0) & (union > 0), inter / union, 0.0)
    return out


def _score(cost, rows, cols):
    """``(number of infinite entries, sum of the finite ones)`` for a set of pairs."""
    vals = cost[rows, cols]
    inf = np.isinf(vals)
    return int(inf.sum()), math.fsum(vals[~inf])


def _solve(cost):
    rr, cc = linear_sum_assignment(np.where(np.isinf(cost), _BIG, cost))
    return rr, cc, _score(cost, rr, cc)


def _lowest_optimal(cost):
    """An optimal assignment; among equal-cost optima the lexicographically lowest.

    Rows are fixed in order, each to the smallest column (or, when rows
    outnumber columns, to nothing as a last resort) that still admits an
    optimal completion. Exact ties need repeated values, so matrices without
    them skip the search.
    """
    rr, cc, best = _solve(cost)
    if np.unique(cost).size == cost.size:
        return [(int(r), int(c)) for r, c in zip(rr, cc)]
    n, m = cost.shape
    k = min(n, m)
    tol = 1e-12 * max(1.0, abs(best[1]))
    fixed, acc = [], []
    free_cols = list(range(m))
    for r in range(n):
        if len(fixed) == k:
            break
        options = list(free_cols)
        if n - r > k - len(fixed):
            options.append(None)
        for col in options:
            rest_cols = [c for c in free_cols if c != col]
            head = [] if col is None else [cost[r, col]]
            if len(fixed) + len(head) < k:
                sub = cost[np.ix_(range(r + 1, n), rest_cols)]
                sr, sc, _ = _solve(sub)
                tail = list(sub[sr, sc])
            else:
                tail = []
            vals = np.array(acc + head + tail, dtype=float)
            inf = np.isinf(vals)
            total = (int(inf.sum()), math.fsum(vals[~inf]))
            if total[0] == best[0] and total[1] <= best[1] + tol:
                if col is not None:
                    fixed.append((r, col))
                    acc.extend(head)
                    free_cols.remove(col)
                break
        else:  # rounding left no option within tolerance
            return [(int(r), int(c)) for r, c in zip(rr, cc)]
    return fixed


def linear_assignment(cost, gate: float = math.inf) -> MatchResult:
    """Minimum-cost one-to-one assignment; pairs costing more than ``gate`` are dropped."""
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        rows = cost.shape[0] if cost.ndim == 2 else 0
        cols = cost.shape[1] if cost.ndim == 2 else 0
        return MatchResult([], list(range(rows)), list(range(cols)))
    if np.isnan(cost).any():
        raise InvalidArgumentError("cost matrix contains nan")
    pairs = _lowest_optimal(cost)
    # infinite entries mark forbidden pairs and never survive
    matches = sorted((r, c) for r, c in pairs if cost[r, c] <= gate and cost[r, c] < math.inf)
    mr = {r for r, _ in matches}
    mc = {c for _, c in matches}
    return MatchResult(matches,
                       [r for r in range(cost.shape[0]) if r not in mr],
                       [c for c in range(cost.shape[1]) if c not in mc])


def _depth_levels(depths, lo, hi, n_levels):
    if hi <= lo:
        return np.full(len(depths), n_levels - 1, dtype=int)
    idx = np.floor((np.asarray(depths, dtype=float) - lo) / (hi - lo) * n_levels)
    return np.clip(idx, 0, n_levels - 1).astype(int)


def depth_cascade_match(tracks, dets, n_levels: int = 8, iou_gate: float = 0.3) -> MatchResult:
    """Associate in rounds over equal depth intervals, nearest first.

    ``tracks`` and ``dets`` are sequences of objects with ``box`` and
    ``depth`` (disparity) attributes. Whatever stays unmatched in one round is
    carried into the next.
    """
    if n_levels < 1:
        raise InvalidArgumentError(f"n_levels must be >= 1, got {n_levels}")
    tracks = list(tracks)
    dets = list(dets)
    if not tracks or not dets:
        return MatchResult([], list(range(len(tracks))), list(range(len(dets))))
    t_depth = [t.depth for t in tracks]
    d_depth = [d.depth for d in dets]
    if n_levels > 1 and any(v is None for v in t_depth + d_depth):
        raise InvalidArgumentError("depth cascade needs depths on tracks and detections")
    if n_levels == 1:
        t_level = np.zeros(len(tracks), dtype=int)
        d_level = np.zeros(len(dets), dtype=int)
    else:
        pooled = np.array(t_depth + d_depth, dtype=float)
        lo, hi = pooled.min(), pooled.max()
        t_level = _depth_levels(t_depth, lo, hi, n_levels)
        d_level = _depth_levels(d_depth, lo, hi, n_levels)

    ious = iou_matrix([t.box for t in tracks], [d.box for d in dets])
    gate = 1.0 - iou_gate
    matches = []
    carry_t, carry_d = [], []
    # larger disparity means nearer to the camera
    for level in range(n_levels - 1, -1, -1):
        ti = sorted(carry_t + [i for i in range(len(tracks)) if t_level[i] == level])
        di = sorted(carry_d + [j for j in range(len(dets)) if d_level[j] == level])
        if ti and di:
            res = linear_assignment(1.0 - ious[np.ix_(ti, di)], gate)
            matches.extend((ti[r], di[c]) for r, c in res.matches)
            carry_t = [ti[r] for r in res.unmatched_tracks]
            carry_d = [di[c] for c in res.unmatched_detections]
        else:
            carry_t, carry_d = ti, di
    matches.sort()
    return MatchResult(matches, sorted(carry_t), sorted(carry_d))


@dataclass(frozen=True)
class TrackerConfig:
    high_thresh: float = 0.5
    low_thresh: float = 0.1
    new_track_thresh: float = 0.6
    iou_gate: float = 0.3
    n_levels: int = 8
    max_age: int = 30
    min_hits: int = 2
    byte_split: bool = False
    compensation: bool = True
    depth_cascade: bool = True
    box_depth: str = "bottom"
    d_min: float = DEFAULT_D_MIN
    d_max: float = DEFAULT_D_MAX

    def __post_init__(self):
        for name in ("high_thresh", "low_thresh", "new_track_thresh"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidArgumentError(f"{name} must lie in [0, 1]")
        if self.low_thresh > self.high_thresh:
            raise InvalidArgumentError("low_thresh must not exceed high_thresh")
        if not 0.0 < self.iou_gate < 1.0:
            raise InvalidArgumentError("iou_gate must lie in (0, 1)")
        if self.n_levels < 1:
            raise InvalidArgumentError("n_levels must be >= 1")
        if self.max_age < 1 or self.min_hits < 1:
            raise InvalidArgumentError("max_age and min_hits must be >= 1")
        if self.box_depth not in ("bottom", "full"):
            raise InvalidArgumentError("box_depth must be 'bottom' or 'full'")
        if not 0 < self.d_min < self.d_max:
            raise InvalidArgumentError("need 0 < d_min < d_max")

    @property
    def levels(self) -> int:
        return self.n_levels if self.depth_cascade else 1


@dataclass
class TrackerState:
    tracks: list = field(default_factory=list)
    next_id: int = 1
    frame: int = 0
    # track id -> box after prediction (and compensation) in the latest step
    predicted: dict = field(default_factory=dict)


def _set_mean_box(state: KalmanState, box: BBox):
    state.mean[:4] = box.to_xyah()


def step_tracker(tracker: TrackerState, detections, depth: np.ndarray,
                 pose: Pose6DoF | None, k: CameraIntrinsics,
                 cfg: TrackerConfig = TrackerConfig()):
    """Advance ``tracker`` by one frame.

    ``pose`` is the camera motion from the previous frame to this one, or
    ``None`` to skip compensation. Returns ``[(track id, BBox)]`` for the
    confirmed tracks matched in this frame.
    """
    depth = np.asarray(depth, dtype=float)
    tracker.frame += 1
    tracks = tracker.tracks

    for tr in tracks:
        tr.state = kf_predict(tr.state)

    if cfg.compensation and pose is not None:
        t = pose_to_transform(pose)
        for tr in tracks:
            if tr.depth is None:
                continue
            z = disparity_to_depth(tr.depth, cfg.d_min, cfg.d_max)
            _set_mean_box(tr.state, compensate_box(tr.box, z, k, t))
    tracker.predicted = {tr.id: tr.box for tr in tracks}

    dets = [Detection(d.box, d.confidence) for d in detections]
    for det in dets:
        det.depth = box_depth(det.box, depth, cfg.box_depth)
    for tr in tracks:
        try:
            tr.depth = box_depth(tr.box, depth, cfg.box_depth)
        except InvalidArgumentError:
            pass  # predicted box left the image; keep the last depth

    if cfg.byte_split:
        high = [j for j, d in enumerate(dets) if d.confidence >= cfg.high_thresh]
        low = [j for j, d in enumerate(dets)
               if cfg.low_thresh <= d.confidence < cfg.high_thresh]
    else:
        high = [j for j, d in enumerate(dets) if d.confidence >= cfg.low_thresh]
        low = []

    matched = set()
    res = depth_cascade_match(tracks, [dets[j] for j in high], cfg.levels, cfg.iou_gate)
    pairs = [(tracks[i], dets[high[j]]) for i, j in res.matches]
    remaining_tracks = [tracks[i] for i in res.unmatched_tracks]
    unmatched_high = [high[j] for j in res.unmatched_detections]

    if low:
        pool = [tr for tr in remaining_tracks
                if tr.status in (TrackStatus.ACTIVE, TrackStatus.LOST)]
        if pool:
            cost = 1.0 - iou_matrix([tr.box for tr in pool], [dets[j].box for j in low])
            res2 = linear_assignment(cost, 1.0 - cfg.iou_gate)
            pairs.extend((pool[i], dets[low[j]]) for i, j in res2.matches)

    out = []
    for tr, det in pairs:
        tr.state = kf_update(tr.state, det.box)
        tr.depth = det.depth
        tr.hits += 1
        tr.misses = 0
        if tr.status is TrackStatus.LOST or (
                tr.status is TrackStatus.TENTATIVE and tr.hits >= cfg.min_hits):
            tr.transition(TrackStatus.ACTIVE)
        matched.add(id(tr))

    for tr in tracks:
        if id(tr) in matched:
            continue
        tr.hits = 0
        tr.misses += 1
        if tr.status is TrackStatus.TENTATIVE:
            tr.transition(TrackStatus.REMOVED)
        elif tr.status is TrackStatus.ACTIVE:
            tr.transition(TrackStatus.LOST)
        if tr.status is TrackStatus.LOST and tr.misses >= cfg.max_age:
            tr.transition(TrackStatus.REMOVED)

    for j in unmatched_high:
        det = dets[j]
        if det.confidence < cfg.new_track_thresh or det.box.area <= 0:
            continue
        tr = Track(tracker.next_id, kf_initiate(det.box), depth=det.depth)
        tracker.next_id += 1
        if cfg.min_hits <= 1:
            tr.transition(TrackStatus.ACTIVE)
        tracks.append(tr)

    tracker.tracks = [tr for tr in tracks if tr.status is not TrackStatus.REMOVED]
    for tr in tracker.tracks:
        if tr.status is TrackStatus.ACTIVE and tr.misses == 0:
            out.append((tr.id, tr.box))
    log.debug("frame %d: %d dets, %d matches, %d live tracks", tracker.frame,
              len(dets), len(pairs), len(tracker.tracks))
    return out
