import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import _fuzz
from depthtrack import formats
from depthtrack.association import Detection
from depthtrack.errors import ConfigError, InvalidArgumentError, ParseError
from depthtrack.geometry import Pose6DoF
from depthtrack.motion import BBox


class TestDepthGrid:
    def test_hand_assembled_bytes(self):
        assert formats.encode_depth_grid([[0.5]]) == bytes.fromhex(
            "44505448" "01000000" "01000000" "0000003f")

    def test_layout(self):
        grid = np.array([[0.0, 0.25, 0.5], [0.75, 1.0, 0.125]])
        buf = formats.encode_depth_grid(grid)
        magic, w, h = struct.unpack_from("<4sII", buf)
        assert (magic, w, h) == (b"DPTH", 3, 2)
        assert struct.unpack_from("<6f", buf, 12) == tuple(grid.ravel())

    @given(arrays(np.float32, st.tuples(st.integers(1, 8), st.integers(1, 8)),
                  elements=st.floats(0, 1, width=32)))
    def test_round_trip_bitwise(self, grid):
        back = formats.decode_depth_grid(formats.encode_depth_grid(grid))
        assert back.astype(np.float32).tobytes() == grid.tobytes()
        assert formats.encode_depth_grid(back) == formats.encode_depth_grid(grid)

    def test_file_round_trip(self, tmp_path, rng):
        grid = rng.random((5, 7)).astype(np.float32)
        formats.write_depth_grid(grid, tmp_path / "d.dpt")
        assert np.array_equal(formats.read_depth_grid(tmp_path / "d.dpt"), grid)

    def test_errors_carry_offsets(self):
        good = formats.encode_depth_grid(np.full((2, 2), 0.5))
        cases = [(good[:5], 5), (b"XPTH" + good[4:], 0), (good[:-1], 27),
                 (good + b"\0", 28), (good[:12] + struct.pack("<f", 1.5) + good[16:], 12),
                 (good[:16] + struct.pack("<f", math.nan) + good[20:], 16)]
        for buf, offset in cases:
            with pytest.raises(ParseError) as info:
                formats.decode_depth_grid(buf, path="g.dpt")
            assert info.value.offset == offset
            assert "g.dpt" in str(info.value)

    def test_encode_rejects(self):
        for bad in ([[1.5]], [[-0.1]], np.zeros(3), [[math.nan]]):
            with pytest.raises(InvalidArgumentError):
                formats.encode_depth_grid(bad)

    def test_fuzz(self, rng):
        seeds = [formats.encode_depth_grid(rng.random((h, w))) for h, w in ((1, 1), (3, 4), (6, 2))]
        assert _fuzz.run(formats.decode_depth_grid, seeds, 1500, rng, ParseError) == []


class TestImages:
    def test_pgm_scaling(self):
        img = formats.decode_image(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
        np.testing.assert_array_equal(img, [[0, 1.0], [128 / 255, 64 / 255]])

    def test_ppm_gray_equals_pgm(self):
        vals = bytes([0, 255, 128, 64])
        gray = formats.decode_image(b"P5\n2 2\n255\n" + vals)
        rgb = formats.decode_image(b"P6\n2 2\n255\n" + bytes(v for v in vals for _ in range(3)))
        np.testing.assert_array_equal(gray, rgb)

    def test_ppm_luma(self):
        img = formats.decode_image(b"P6 1 1 255\n" + bytes([255, 0, 0]))
        assert img[0, 0] == pytest.approx(0.299)

    def test_header_comments(self):
        img = formats.decode_image(b"P5\n# made by hand\n1 # width\n1\n255\n\x80")
        assert img[0, 0] == 128 / 255

    @pytest.mark.parametrize("buf", [b"P2\n1 1\n255\n0", b"P5\n1 1\n65535\n\0\0",
                                     b"P5\n1 1\n15\n\0", b"P5\n2 2\n255\n\0", b"P5\n0 1\n255\n",
                                     b"P5 1 1", b"", b"P5\n-1 1\n255\n\0"])
    def test_rejects(self, buf):
        with pytest.raises(ParseError):
            formats.decode_image(buf)

    def test_round_trip(self, tmp_path, rng):
        img = np.round(rng.random((6, 9)) * 255) / 255
        formats.write_image(img, tmp_path / "a.pgm")
        back = formats.read_image(tmp_path / "a.pgm")
        np.testing.assert_array_equal(back, img)
        formats.write_image(back, tmp_path / "b.pgm")
        assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()

    def test_fuzz(self, rng):
        seeds = [formats.encode_image(rng.random((3, 4))),
                 b"P6\n2 1\n255\n" + bytes(range(6)),
                 b"P5\n# c\n2 2\n255\n" + bytes(4)]
        assert _fuzz.run(formats.decode_image, seeds, 1500, rng, ParseError) == []


class TestMot:
    def test_single_line(self):
        (rec,) = formats.parse_mot("1,-1,10,10,20,20,0.9")
        assert (rec.frame, rec.id, rec.box, rec.confidence) == (1, -1, BBox(10, 10, 30, 30), 0.9)

    def test_empty(self, tmp_path):
        (tmp_path / "e.txt").write_text("")
        assert formats.read_detections(tmp_path / "e.txt") == {}

    def test_trailing_fields_ignored(self):
        (rec,) = formats.parse_mot("3, 7, 1.5, 2, 3, 4, 0.5, -1, -1, -1, extra\n")
        assert rec.id == 7 and rec.box == BBox(1.5, 2, 4.5, 6)

    @pytest.mark.parametrize("text,line", [("1,-1,1,1,2,2,0.9\n1,-1,1,1", 2),
                                           ("1,-1,1,1,0,2,0.9", 1),
                                           ("\n\n1,-1,a,1,2,2,0.9", 3),
                                           ("0,-1,1,1,2,2,0.9", 1),
                                           ("1,-1,1,1,2,nan,0.9", 1)])
    def test_errors_name_line(self, text, line):
        with pytest.raises(ParseError) as info:
            formats.parse_mot(text, path="x.txt")
        assert info.value.line == line and f"line {line}" in str(info.value)

    def test_duplicate_trajectory_row(self, tmp_path):
        (tmp_path / "t.txt").write_text("1,1,0,0,2,2,1\n1,1,5,5,2,2,1\n")
        with pytest.raises(ParseError) as info:
            formats.read_trajectories(tmp_path / "t.txt")
        assert info.value.line == 2

    def test_invalid_utf8(self, tmp_path):
        (tmp_path / "b.txt").write_bytes(b"1,-1,1,1,2,2,0.9\n\xff\xfe")
        with pytest.raises(ParseError):
            formats.read_detections(tmp_path / "b.txt")

    def test_detection_confidence_clamped(self, tmp_path):
        (tmp_path / "d.txt").write_text("2,-1,0,0,4,4,1.7\n2,-1,5,5,4,4,-3\n")
        dets = formats.read_detections(tmp_path / "d.txt")
        assert [d.confidence for d in dets[2]] == [1.0, 0.0]

    @given(st.lists(st.tuples(st.integers(1, 50), st.integers(1, 9),
                              st.floats(-1e4, 1e4), st.floats(-1e4, 1e4),
                              st.floats(0.01, 1e3), st.floats(0.01, 1e3)), max_size=8))
    def test_round_trip_at_declared_precision(self, rows):
        rows = list({(f, i): (f, i, x, y, w, h) for f, i, x, y, w, h in rows}.values())
        entries = [(f, i, BBox.from_tlwh(x, y, w, h)) for f, i, x, y, w, h in rows]
        text = "".join(formats.format_mot_line(*e) for e in entries)
        parsed = formats.parse_mot(text)
        again = "".join(formats.format_mot_line(r.frame, r.id, r.box, r.confidence) for r in parsed)
        assert again == text
        for r, (_, _, b) in zip(parsed, entries):
            np.testing.assert_allclose(r.box.as_array(), b.as_array(), atol=2e-6)

    def test_trajectories_then_detections(self, tmp_path):
        entries = [(1, 3, BBox(10.25, 4.5, 30.125, 50.0)), (2, 3, BBox(11, 5, 31, 51))]
        formats.write_trajectories(tmp_path / "t.txt", entries)
        dets = formats.read_detections(tmp_path / "t.txt")
        assert dets[1][0].box == entries[0][2] and dets[2][0].box == entries[1][2]

    def test_write_detections(self, tmp_path):
        dets = {1: [Detection(BBox(1, 2, 3, 4), 0.75)], 3: [Detection(BBox(0, 0, 5, 5), 0.5)]}
        formats.write_detections(tmp_path / "d.txt", dets)
        back = formats.read_detections(tmp_path / "d.txt")
        assert {f: [(d.box, d.confidence) for d in v] for f, v in back.items()} == \
            {f: [(d.box, d.confidence) for d in v] for f, v in dets.items()}

    def test_fuzz(self, rng):
        seeds = [b"1,-1,10,10,20,20,0.9\n2,-1,11.5,10,20,20,0.8,-1,-1,-1\n",
                 b"1,4,0.000000,1.000000,2.000000,3.000000,1.000000,-1,-1,-1\n"]
        assert _fuzz.run(lambda b: formats.parse_mot(b.decode("utf-8")), seeds, 1500, rng,
                         (ParseError, UnicodeDecodeError)) == []


class TestPoses:
    def test_round_trip(self, tmp_path, rng):
        poses = [Pose6DoF(*rng.normal(size=6)) for _ in range(4)]
        formats.write_poses(tmp_path / "p.txt", poses)
        assert formats.read_poses(tmp_path / "p.txt") == poses

    def test_errors(self, tmp_path):
        for text, line in (("0 0 0 0 0\n", 1), ("0 0 0 0 0 0\n0 0 x 0 0 0\n", 2),
                           ("0 0 0 0 0 inf\n", 1)):
            (tmp_path / "p.txt").write_text(text)
            with pytest.raises(ParseError) as info:
                formats.read_poses(tmp_path / "p.txt")
            assert info.value.line == line


class TestConfig:
    def test_empty_is_default(self):
        cfg = formats.parse_config("")
        assert cfg == formats.RunConfig()
        assert cfg.camera == formats.DEFAULT_CAMERA

    def test_values(self):
        cfg = formats.parse_config("# comment\ntracker.n_levels = 8\ncamera.fx = 300 # f\n"
                                   "tracker.byte_split = on\ndepth.d_max = 50\n"
                                   "align.pyramid_levels = 2\n")
        assert cfg.tracker.n_levels == 8 and cfg.camera.fx == 300
        assert cfg.tracker.byte_split is True
        assert cfg.d_max == 50 and cfg.tracker.d_max == 50 and cfg.align.d_max == 50
        assert cfg.align.pyramid_levels == 2

    @pytest.mark.parametrize("text,key", [("tracker.n_levels = 0", "tracker.n_levels"),
                                          ("tracker.n_levels = two", "tracker.n_levels"),
                                          ("tracker.colour = red", "tracker.colour"),
                                          ("camera.fx = -1", "camera.fx"),
                                          ("tracker.iou_gate = 1", "tracker.iou_gate"),
                                          ("tracker.compensation = maybe", "tracker.compensation"),
                                          ("depth.d_min = 5\ndepth.d_max = 2", "depth.d_max"),
                                          ("align.converge_tol = nan", "align.converge_tol")])
    def test_errors_name_key(self, text, key):
        with pytest.raises(ConfigError) as info:
            formats.parse_config(text)
        assert info.value.key == key

    def test_format_round_trip(self, tmp_path):
        cfg = formats.parse_config("tracker.n_levels = 4\ntracker.depth_cascade = off\n"
                                   "camera.cx = 12.25\nalign.alpha = 0.5\n")
        formats.write_config(cfg, tmp_path / "c", sections=("camera", "depth", "tracker", "align"))
        assert formats.read_config(tmp_path / "c") == cfg

    def test_overrides(self):
        cfg = formats.with_overrides(formats.RunConfig(), n_levels=1, compensation=False)
        assert cfg.tracker.n_levels == 1 and cfg.tracker.compensation is False


@pytest.mark.parametrize("tid", ["1e999", "nan", "2.5"])
def test_mot_rejects_non_integer_ids(tid):
    with pytest.raises(ParseError):
        formats.parse_mot(f"1,{tid},1,1,2,2,0.9")
