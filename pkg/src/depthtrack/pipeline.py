"""Sequence-level drivers tying the simulator, tracker and pose alignment together."""

from __future__ import annotations

import logging

import numpy as np

from .association import Detection, TrackerConfig, TrackerState, step_tracker
from .geometry import CameraIntrinsics
from .pose_align import AlignConfig, estimate_pose
from .simulator import Scene, detections_from_gt, render

log = logging.getLogger(__name__)


def simulate_detections(scene: Scene, seed: int = 0, jitter: float = 0.0,
                        confidence: float = 0.9) -> dict:
    """``{frame (1-based): [Detection]}`` derived from the scene's gt boxes."""
    rng = np.random.default_rng(seed)
    out = {}
    for t in range(scene.frame_count):
        dets = detections_from_gt(render(scene, t).gt_boxes, rng, jitter, confidence)
        out[t + 1] = [Detection(b, c) for b, c in dets]
    return out


def track_sequence(depths, detections: dict, k: CameraIntrinsics, cfg: TrackerConfig,
                   poses=None, on_frame=None):
    """Run the tracker over a sequence.

    ``depths`` is an indexable of disparity grids (frame ``i`` at index
    ``i-1``), ``poses`` an indexable of inter-frame poses or ``None``.
    ``on_frame(frame, outputs)`` is called after each frame. Returns the list
    of ``(frame, id, box)`` outputs.
    """
    state = TrackerState()
    results = []
    for i in range(len(depths)):
        frame = i + 1
        pose = poses[i] if poses is not None and i > 0 else None
        out = step_tracker(state, detections.get(frame, []), depths[i], pose, k, cfg)
        rows = [(frame, tid, box) for tid, box in sorted(out, key=lambda x: x[0])]
        results.extend(rows)
        if on_frame is not None:
            on_frame(frame, rows)
    return results


class EstimatedPoses:
    """Lazily estimated inter-frame poses, indexable like a list.

    Entry ``i`` is the motion from frame ``i-1`` to ``i`` (entry 0 unused).
    """

    def __init__(self, images, depths, k: CameraIntrinsics, cfg: AlignConfig):
        self.images = images
        self.depths = depths
        self.k = k
        self.cfg = cfg
        self._cache = {}

    def __len__(self):
        return len(self.images)

    def __getitem__(self, i):
        if i not in self._cache:
            est = estimate_pose(self.images[i], self.images[i - 1], self.depths[i - 1],
                                self.k, self.cfg)
            log.info("frame %d: estimated pose %s (residual %.4g)", i + 1,
                     np.round(est.pose.as_array(), 5), est.residual)
            self._cache[i] = est.pose
        return self._cache[i]
