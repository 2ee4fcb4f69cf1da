import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from depthtrack.association import (Detection, TrackerConfig, TrackerState, box_depth,
                                    depth_cascade_match, iou, iou_matrix, linear_assignment,
                                    step_tracker)
from depthtrack.errors import InvalidArgumentError
from depthtrack.geometry import CameraIntrinsics
from depthtrack.motion import BBox, Track, TrackStatus, kf_initiate, kf_predict, kf_update

K = CameraIntrinsics(100, 100, 49.5, 49.5)


@st.composite
def boxes(draw, lo=0.0, hi=60.0):
    x0, y0 = draw(st.floats(lo, hi)), draw(st.floats(lo, hi))
    return BBox(x0, y0, x0 + draw(st.floats(0.5, 30)), y0 + draw(st.floats(0.5, 30)))


class Item:
    """Minimal box/depth carrier for the matcher."""

    def __init__(self, box, depth=None):
        self.box = box
        self.depth = depth


def brute_force_cost(cost):
    n, m = cost.shape
    if n <= m:
        return min(sum(cost[i, p[i]] for i in range(n))
                   for p in itertools.permutations(range(m), n))
    return min(sum(cost[p[j], j] for j in range(m))
               for p in itertools.permutations(range(n), m))


def check_partition(res, n_tracks, n_dets):
    rows = [r for r, _ in res.matches] + res.unmatched_tracks
    cols = [c for _, c in res.matches] + res.unmatched_detections
    assert sorted(rows) == list(range(n_tracks))
    assert sorted(cols) == list(range(n_dets))


class TestBoxDepth:
    def test_constant(self):
        d = np.full((10, 12), 0.37)
        assert box_depth(BBox(1, 1, 5, 8), d) == pytest.approx(0.37)
        assert box_depth(BBox(1, 1, 5, 8), d, "full") == pytest.approx(0.37)

    def test_ramp(self):
        d = np.tile(np.arange(5) / 4, (3, 1))
        assert box_depth(BBox(0, 0, 4, 2), d) == pytest.approx(0.5)

    def test_bottom_row_only(self):
        d = np.zeros((6, 6))
        d[4] = 1.0
        assert box_depth(BBox(1, 0, 3, 4), d) == 1.0
        assert box_depth(BBox(1, 0, 3, 4), d, "full") == pytest.approx(1 / 5)

    def test_clipped_to_last_row(self):
        d = np.zeros((4, 4))
        d[3] = 0.8
        assert box_depth(BBox(0, 1, 3, 40), d) == pytest.approx(0.8)

    def test_sub_pixel_width_uses_centre_column(self):
        d = np.tile(np.arange(5) / 4, (3, 1))
        assert box_depth(BBox(1.2, 0, 1.6, 2), d) == pytest.approx(0.25)

    @pytest.mark.parametrize("b", [BBox(-10, 0, -1, 2), BBox(0, 20, 3, 30), BBox(6, 0, 9, 2)])
    def test_outside(self, b):
        with pytest.raises(InvalidArgumentError):
            box_depth(b, np.zeros((5, 5)))

    def test_bad_mode(self):
        with pytest.raises(InvalidArgumentError):
            box_depth(BBox(0, 0, 1, 1), np.zeros((3, 3)), "centre")


class TestIoU:
    def test_examples(self):
        b = BBox(0, 0, 2, 2)
        assert iou(b, b) == 1.0
        assert iou(b, BBox(5, 5, 6, 6)) == 0.0
        assert iou(b, BBox(1, 0, 3, 2)) == pytest.approx(1 / 3)
        assert iou(BBox(0, 0, 0, 2), BBox(0, 0, 0, 2)) == 0.0

    @given(st.lists(boxes(), max_size=5), st.lists(boxes(), max_size=5))
    def test_matrix_matches_scalar(self, a, b):
        m = iou_matrix(a, b)
        assert m.shape == (len(a), len(b))
        for i, j in itertools.product(range(len(a)), range(len(b))):
            assert m[i, j] == pytest.approx(iou(a[i], b[j]), abs=1e-12)
            assert 0.0 <= m[i, j] <= 1.0
            assert m[i, j] == pytest.approx(iou(b[j], a[i]), abs=1e-12)


class TestLinearAssignment:
    def test_diagonal(self):
        assert linear_assignment([[0, 1], [1, 0]], 0.5).matches == [(0, 0), (1, 1)]

    def test_gated(self):
        res = linear_assignment([[0.9]], 0.5)
        assert res.matches == [] and res.unmatched_tracks == [0]
        assert res.unmatched_detections == [0]

    def test_empty(self):
        res = linear_assignment(np.zeros((3, 0)))
        assert res.matches == [] and res.unmatched_tracks == [0, 1, 2]
        assert linear_assignment(np.zeros((0, 2))).unmatched_detections == [0, 1]

    def test_infinite_entries(self):
        res = linear_assignment([[math.inf, 1.0], [2.0, math.inf]])
        assert res.matches == [(0, 1), (1, 0)]
        res = linear_assignment([[math.inf, math.inf], [1.0, math.inf]], gate=10)
        assert res.matches == [(1, 0)] and res.unmatched_tracks == [0]

    def test_nan_rejected(self):
        with pytest.raises(InvalidArgumentError):
            linear_assignment([[math.nan]])

    def test_brute_force_4x4(self, rng):
        for _ in range(50):
            cost = rng.random((4, 4))
            res = linear_assignment(cost)
            assert sum(cost[r, c] for r, c in res.matches) == pytest.approx(
                brute_force_cost(cost), abs=1e-12)

    @given(st.integers(1, 5), st.integers(1, 5), st.data())
    def test_rectangular_optimal(self, n, m, data):
        vals = data.draw(st.lists(st.floats(0, 1), min_size=n * m, max_size=n * m))
        cost = np.array(vals).reshape(n, m)
        res = linear_assignment(cost)
        check_partition(res, n, m)
        assert len(res.matches) == min(n, m)
        assert sum(cost[r, c] for r, c in res.matches) == pytest.approx(
            brute_force_cost(cost), abs=1e-9)


class TestCascade:
    def test_single_level_equals_plain(self, rng):
        for _ in range(100):
            n, m = rng.integers(0, 6, 2)
            tr = [Item(BBox(x, y, x + 10, y + 10), rng.random()) for x, y in rng.uniform(0, 20, (n, 2))]
            de = [Item(BBox(x, y, x + 10, y + 10), rng.random()) for x, y in rng.uniform(0, 20, (m, 2))]
            got = depth_cascade_match(tr, de, 1, 0.3)
            if n and m:
                ref = linear_assignment(1 - iou_matrix([t.box for t in tr], [d.box for d in de]), 0.7)
            else:
                ref = linear_assignment(np.zeros((n, m)))
            assert got == ref

    def test_depth_separates_ambiguous_pairs(self):
        base = BBox(10, 10, 30, 50)
        nudged = BBox(10.5, 10, 30.5, 50)
        tracks = [Item(base, 0.2), Item(nudged, 0.8)]
        dets = [Item(base, 0.8), Item(nudged, 0.2)]
        ious = iou_matrix([t.box for t in tracks], [d.box for d in dets])
        assert ious.min() > 0.3
        # exhaustive oracle over the two possible full assignments
        same_depth = [(0, 1), (1, 0)]
        assignments = [[(0, 0), (1, 1)], [(0, 1), (1, 0)]]
        iou_best = max(assignments, key=lambda a: sum(ious[r, c] for r, c in a))
        assert iou_best != same_depth  # IoU alone prefers the cross-depth pairing
        assert depth_cascade_match(tracks, dets, 8, 0.3).matches == same_depth
        assert depth_cascade_match(tracks, dets, 1, 0.3).matches == iou_best

    def test_carry_over_to_farther_level(self):
        # the near detection has no near track and is matched to the far one later
        tracks = [Item(BBox(0, 0, 10, 10), 0.1)]
        dets = [Item(BBox(1, 0, 11, 10), 0.9)]
        res = depth_cascade_match(tracks, dets, 8, 0.3)
        assert res.matches == [(0, 0)]

    def test_empty_side(self):
        res = depth_cascade_match([Item(BBox(0, 0, 1, 1), 0.5)] * 3, [], 8)
        assert res.matches == [] and res.unmatched_tracks == [0, 1, 2]

    def test_bad_levels(self):
        with pytest.raises(InvalidArgumentError):
            depth_cascade_match([], [], 0)

    def test_missing_depth(self):
        with pytest.raises(InvalidArgumentError):
            depth_cascade_match([Item(BBox(0, 0, 1, 1))], [Item(BBox(0, 0, 1, 1), 0.3)], 4)

    @given(st.lists(st.tuples(boxes(), st.floats(0, 1)), max_size=6),
           st.lists(st.tuples(boxes(), st.floats(0, 1)), max_size=6),
           st.integers(1, 10), st.floats(0.05, 0.95))
    def test_partition_and_gate(self, t, d, levels, gate):
        tracks = [Item(b, z) for b, z in t]
        dets = [Item(b, z) for b, z in d]
        res = depth_cascade_match(tracks, dets, levels, gate)
        check_partition(res, len(tracks), len(dets))
        for r, c in res.matches:
            assert iou(tracks[r].box, dets[c].box) >= gate - 1e-12

    def test_single_level_cost_is_optimal(self, rng):
        for _ in range(200):
            n, m = rng.integers(1, 7, 2)
            # every pair overlaps, so the gate never demotes anything
            tr = [Item(BBox(x, y, x + 20, y + 20)) for x, y in rng.uniform(0, 12, (n, 2))]
            de = [Item(BBox(x, y, x + 20, y + 20)) for x, y in rng.uniform(0, 12, (m, 2))]
            cost = 1 - iou_matrix([t.box for t in tr], [d.box for d in de])
            res = depth_cascade_match(tr, de, 1, 1e-9)
            assert len(res.matches) == min(n, m)
            assert sum(cost[r, c] for r, c in res.matches) == pytest.approx(
                brute_force_cost(cost), abs=1e-9)


def sort_reference(frames, cfg):
    """Plain predict -> IoU Hungarian -> update loop built from the same parts."""
    tracks, next_id, out = [], 1, []
    for dets in frames:
        for tr in tracks:
            tr.state = kf_predict(tr.state)
        use = [d for d in dets if d.confidence >= cfg.low_thresh]
        if tracks and use:
            cost = 1 - iou_matrix([t.box for t in tracks], [d.box for d in use])
            res = linear_assignment(cost, 1 - cfg.iou_gate)
        else:
            res = linear_assignment(np.zeros((len(tracks), len(use))))
        for r, c in res.matches:
            tr = tracks[r]
            tr.state = kf_update(tr.state, use[c].box)
            tr.hits += 1
            tr.misses = 0
            if tr.status is TrackStatus.LOST or (tr.status is TrackStatus.TENTATIVE
                                                 and tr.hits >= cfg.min_hits):
                tr.transition(TrackStatus.ACTIVE)
        for r in res.unmatched_tracks:
            tr = tracks[r]
            tr.hits = 0
            tr.misses += 1
            if tr.status is TrackStatus.TENTATIVE:
                tr.transition(TrackStatus.REMOVED)
            elif tr.status is TrackStatus.ACTIVE:
                tr.transition(TrackStatus.LOST)
            if tr.status is TrackStatus.LOST and tr.misses >= cfg.max_age:
                tr.transition(TrackStatus.REMOVED)
        for c in res.unmatched_detections:
            if use[c].confidence >= cfg.new_track_thresh:
                tracks.append(Track(next_id, kf_initiate(use[c].box)))
                next_id += 1
        tracks = [t for t in tracks if t.status is not TrackStatus.REMOVED]
        out.append([(t.id, t.box) for t in tracks
                    if t.status is TrackStatus.ACTIVE and t.misses == 0])
    return out


def random_sequence(rng, n_frames=12, n_obj=4, size=100):
    pos = rng.uniform(10, 70, (n_obj, 2))
    vel = rng.uniform(-3, 3, (n_obj, 2))
    frames = []
    for _ in range(n_frames):
        pos += vel
        dets = []
        for (x, y) in pos:
            if rng.random() < 0.15:
                continue
            x0, y0 = np.clip([x, y], 0, size - 20) + rng.normal(0, 0.5, 2)
            dets.append(Detection(BBox(x0, y0, x0 + 15, y0 + 18), float(rng.uniform(0.05, 1))))
        frames.append(dets)
    return frames


class TestTracker:
    def test_cold_start(self):
        st_ = TrackerState()
        dets = [Detection(BBox(10, 10, 20, 30), 0.9), Detection(BBox(50, 10, 60, 30), 0.9)]
        out = step_tracker(st_, dets, np.full((100, 100), 0.3), None, K)
        assert out == []
        assert [t.status for t in st_.tracks] == [TrackStatus.TENTATIVE] * 2

    def test_static_scene_stable_ids(self):
        st_ = TrackerState()
        dets = [Detection(BBox(10, 10, 20, 30), 0.9), Detection(BBox(50, 10, 60, 30), 0.9)]
        seen = []
        for _ in range(5):
            out = step_tracker(st_, dets, np.full((100, 100), 0.3), None, K)
            seen.append(sorted(i for i, _ in out))
        assert seen == [[], [1, 2], [1, 2], [1, 2], [1, 2]]

    def test_low_confidence_does_not_spawn(self):
        st_ = TrackerState()
        step_tracker(st_, [Detection(BBox(10, 10, 20, 30), 0.55)], np.zeros((50, 50)), None, K)
        assert st_.tracks == []

    def test_lost_then_removed(self):
        cfg = TrackerConfig(max_age=3)
        st_ = TrackerState()
        det = [Detection(BBox(10, 10, 20, 30), 0.9)]
        d = np.zeros((50, 50))
        step_tracker(st_, det, d, None, K, cfg)
        step_tracker(st_, det, d, None, K, cfg)
        assert st_.tracks[0].status is TrackStatus.ACTIVE
        step_tracker(st_, [], d, None, K, cfg)
        assert st_.tracks[0].status is TrackStatus.LOST
        step_tracker(st_, [], d, None, K, cfg)
        step_tracker(st_, [], d, None, K, cfg)
        assert st_.tracks == []

    def test_lost_track_recovers_id(self):
        st_ = TrackerState()
        det = [Detection(BBox(10, 10, 20, 30), 0.9)]
        d = np.zeros((50, 50))
        for dets in (det, det, [], det):
            out = step_tracker(st_, dets, d, None, K)
        assert [i for i, _ in out] == [1]

    def test_byte_second_stage(self):
        cfg = TrackerConfig(byte_split=True)
        st_ = TrackerState()
        d = np.zeros((50, 50))
        box = BBox(10, 10, 20, 30)
        step_tracker(st_, [Detection(box, 0.9)], d, None, K, cfg)
        step_tracker(st_, [Detection(box, 0.9)], d, None, K, cfg)
        out = step_tracker(st_, [Detection(box, 0.3)], d, None, K, cfg)
        assert [i for i, _ in out] == [1]
        # the same weak detection is dropped entirely without the second stage
        st2 = TrackerState()
        cfg2 = TrackerConfig(byte_split=True, low_thresh=0.4)
        for conf in (0.9, 0.9, 0.3):
            out = step_tracker(st2, [Detection(box, conf)], d, None, K, cfg2)
        assert out == []

    def test_config_validation(self):
        for kw in (dict(high_thresh=1.2), dict(low_thresh=0.7, high_thresh=0.5),
                   dict(iou_gate=0), dict(n_levels=0), dict(max_age=0), dict(box_depth="x")):
            with pytest.raises(InvalidArgumentError):
                TrackerConfig(**kw)
        assert TrackerConfig(depth_cascade=False).levels == 1

    def test_golden_sort_equivalence(self, rng):
        cfg = TrackerConfig(n_levels=1, byte_split=False, compensation=False)
        depth = np.full((100, 100), 0.5)
        for _ in range(30):
            frames = random_sequence(rng)
            st_ = TrackerState()
            got = [step_tracker(st_, f, depth, None, K, cfg) for f in frames]
            ref = sort_reference(frames, cfg)
            assert [[i for i, _ in o] for o in got] == [[i for i, _ in o] for o in ref]
            for o, r in zip(got, ref):
                for (_, a), (_, b) in zip(o, r):
                    np.testing.assert_allclose(a.as_array(), b.as_array(), atol=1e-9)

    def test_predicted_boxes_recorded(self):
        st_ = TrackerState()
        det = [Detection(BBox(10, 10, 20, 30), 0.9)]
        step_tracker(st_, det, np.zeros((50, 50)), None, K)
        step_tracker(st_, det, np.zeros((50, 50)), None, K)
        assert set(st_.predicted) == {1}


class TestTieBreak:
    def test_uniform_matrix_is_diagonal(self):
        assert linear_assignment(np.ones((3, 3))).matches == [(0, 0), (1, 1), (2, 2)]

    def test_prefers_lowest_rows_when_tall(self):
        res = linear_assignment(np.zeros((4, 2)))
        assert res.matches == [(0, 0), (1, 1)] and res.unmatched_tracks == [2, 3]

    def test_prefers_lowest_columns_when_wide(self):
        res = linear_assignment(np.array([[0.5, 0.5, 0.5]]))
        assert res.matches == [(0, 0)]

    def test_lowest_among_optima_by_enumeration(self, rng):
        for _ in range(300):
            n, m = (int(v) for v in rng.integers(1, 5, 2))
            cost = rng.integers(0, 3, (n, m)).astype(float)
            if rng.random() < 0.3:
                cost[rng.random((n, m)) < 0.2] = np.inf
            got = linear_assignment(cost).matches
            k = min(n, m)
            if n <= m:
                cands = [sorted(zip(range(n), p)) for p in itertools.permutations(range(m), n)]
            else:
                cands = [sorted(zip(p, range(m))) for p in itertools.permutations(range(n), m)]

            def key(pairs):
                vals = [cost[r, c] for r, c in pairs]
                return (sum(np.isinf(vals)), sum(v for v in vals if np.isfinite(v)))

            best = min(key(c) for c in cands)
            lowest = min(c for c in cands if key(c) == best)
            assert len(lowest) == k
            assert got == [p for p in lowest if np.isfinite(cost[p])]
