"""CLEAR-MOT scores and IDF1 for trajectory sets."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .association import iou_matrix, linear_assignment
from .errors import InvalidArgumentError
from .motion import BBox

DEFAULT_IOU_GATE = 0.5
TRACKED_RATIO = 0.8
LOST_RATIO = 0.2


class TrajectorySet:
    """Boxes keyed by ``(frame, id)``; frames are 1-based."""

    def __init__(self, entries=()):
        self._entries = {}
        for frame, tid, box in entries:
            self.add(frame, tid, box)

    def add(self, frame: int, tid: int, box: BBox):
        frame, tid = int(frame), int(tid)
        if frame < 1:
            raise InvalidArgumentError(f"frames are 1-based, got {frame}")
        if (frame, tid) in self._entries:
            raise InvalidArgumentError(f"duplicate entry for frame {frame}, id {tid}")
        self._entries[(frame, tid)] = box

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        for (frame, tid), box in sorted(self._entries.items()):
            yield frame, tid, box

    @property
    def entries(self):
        return list(self)

    def frames(self) -> dict:
        """``{frame: [(id, box), ...]}`` with ids ascending."""
        out = defaultdict(list)
        for frame, tid, box in self:
            out[frame].append((tid, box))
        return dict(out)

    def ids(self):
        return sorted({tid for _, tid in self._entries})

    def relabel(self, mapping) -> TrajectorySet:
        return TrajectorySet((f, mapping[t], b) for f, t, b in self)


@dataclass
class MetricsReport:
    mota: float
    idf1: float
    fp: int
    fn: int
    id_switches: int
    mt: int
    ml: int
    num_gt: int
    num_matches: int = 0

    def table(self) -> list:
        """``(name, value)`` rows in the fixed output order."""
        return [("MOTA", self.mota), ("IDF1", self.idf1), ("FP", self.fp),
                ("FN", self.fn), ("IDs", self.id_switches), ("MT", self.mt),
                ("ML", self.ml)]

    def format(self) -> str:
        lines = []
        for name, value in self.table():
            lines.append(f"{name} {value:.6f}" if isinstance(value, float) else f"{name} {value}")
        return "\n".join(lines) + "\n"


def _check(gt: TrajectorySet, iou_gate: float):
    if len(gt) == 0:
        raise InvalidArgumentError("ground truth is empty; MOTA is undefined")
    if not 0.0 < iou_gate < 1.0:
        raise InvalidArgumentError(f"iou_gate must lie in (0, 1), got {iou_gate}")


def clear_metrics(gt: TrajectorySet, pred: TrajectorySet,
                  iou_gate: float = DEFAULT_IOU_GATE) -> MetricsReport:
    """Frame-by-frame CLEAR-MOT evaluation (IDF1 included in the report)."""
    _check(gt, iou_gate)
    gt_frames = gt.frames()
    pr_frames = pred.frames()
    last_match = {}
    fp = fn = switches = matched_total = 0
    tracked = defaultdict(int)
    present = defaultdict(int)

    for frame in sorted(set(gt_frames) | set(pr_frames)):
        g = gt_frames.get(frame, [])
        p = pr_frames.get(frame, [])
        for gid, _ in g:
            present[gid] += 1
        ious = iou_matrix([b for _, b in g], [b for _, b in p])
        p_index = {pid: j for j, (pid, _) in enumerate(p)}
        pairs = []
        used_g, used_p = set(), set()
        # keep last frame's correspondences while they still overlap
        for i, (gid, _) in enumerate(g):
            j = p_index.get(last_match.get(gid))
            if j is not None and j not in used_p and ious[i, j] >= iou_gate:
                pairs.append((i, j))
                used_g.add(i)
                used_p.add(j)
        gi = [i for i in range(len(g)) if i not in used_g]
        pj = [j for j in range(len(p)) if j not in used_p]
        if gi and pj:
            sub = ious[np.ix_(gi, pj)]
            cost = np.where(sub >= iou_gate, 1.0 - sub, np.inf)
            res = linear_assignment(cost, 1.0 - iou_gate)
            pairs.extend((gi[r], pj[c]) for r, c in res.matches if np.isfinite(cost[r, c]))

        for i, j in pairs:
            gid, pid = g[i][0], p[j][0]
            if gid in last_match and last_match[gid] != pid:
                switches += 1
            last_match[gid] = pid
            tracked[gid] += 1
        matched_total += len(pairs)
        fp += len(p) - len(pairs)
        fn += len(g) - len(pairs)

    num_gt = len(gt)
    ratios = [tracked[gid] / present[gid] for gid in present]
    return MetricsReport(
        mota=1.0 - (fp + fn + switches) / num_gt,
        idf1=idf1(gt, pred, iou_gate),
        fp=fp, fn=fn, id_switches=switches,
        mt=sum(r >= TRACKED_RATIO for r in ratios),
        ml=sum(r <= LOST_RATIO for r in ratios),
        num_gt=num_gt, num_matches=matched_total)


def identity_overlaps(gt: TrajectorySet, pred: TrajectorySet, iou_gate: float):
    """Co-occurrence counts ``(gt ids, pred ids, counts[g, p])`` above the gate."""
    g_ids, p_ids = gt.ids(), pred.ids()
    gpos = {g: i for i, g in enumerate(g_ids)}
    ppos = {p: j for j, p in enumerate(p_ids)}
    counts = np.zeros((len(g_ids), len(p_ids)), dtype=np.int64)
    pr_frames = pred.frames()
    for frame, g in gt.frames().items():
        p = pr_frames.get(frame)
        if not p:
            continue
        ious = iou_matrix([b for _, b in g], [b for _, b in p])
        for i, j in zip(*np.nonzero(ious >= iou_gate)):
            counts[gpos[g[i][0]], ppos[p[j][0]]] += 1
    return g_ids, p_ids, counts


def idf1(gt: TrajectorySet, pred: TrajectorySet, iou_gate: float = DEFAULT_IOU_GATE) -> float:
    """Identity F1 under the one-to-one gt-id/pred-id pairing maximising IDTP."""
    _check(gt, iou_gate)
    _, _, counts = identity_overlaps(gt, pred, iou_gate)
    idtp = 0
    if counts.size:
        rows, cols = linear_sum_assignment(counts, maximize=True)
        idtp = int(counts[rows, cols].sum())
    idfn = len(gt) - idtp
    idfp = len(pred) - idtp
    return 2 * idtp / (2 * idtp + idfp + idfn)
