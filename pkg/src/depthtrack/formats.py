"""Readers and writers for images, disparity grids, MOT text files, poses and config.

Every reader reports malformed input as :class:`~depthtrack.errors.ParseError`
(or :class:`~depthtrack.errors.ConfigError` for configuration files) carrying a
line number or byte offset.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .association import Detection, TrackerConfig
from .errors import ConfigError, InvalidArgumentError, ParseError
from .geometry import DEFAULT_D_MAX, DEFAULT_D_MIN, CameraIntrinsics, Pose6DoF
from .imaging import as_grid, to_luma
from .metrics import TrajectorySet
from .motion import BBox
from .pose_align import AlignConfig

DEPTH_MAGIC = b"DPTH"
_DEPTH_HEADER = struct.Struct("<4sII")


# -- disparity grids ---------------------------------------------------------

def encode_depth_grid(grid) -> bytes:
    arr = np.asarray(grid)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidArgumentError("depth grid must be a non-empty 2-D array")
    data = arr.astype("<f4")
    if not np.all(np.isfinite(data)) or data.min() < 0 or data.max() > 1:
        raise InvalidArgumentError("depth values must lie in [0, 1]")
    h, w = arr.shape
    return _DEPTH_HEADER.pack(DEPTH_MAGIC, w, h) + data.tobytes(order="C")


def decode_depth_grid(buf: bytes, path=None) -> np.ndarray:
    if len(buf) < _DEPTH_HEADER.size:
        raise ParseError(f"header needs {_DEPTH_HEADER.size} bytes, got {len(buf)}",
                         path=path, offset=len(buf))
    magic, w, h = _DEPTH_HEADER.unpack_from(buf)
    if magic != DEPTH_MAGIC:
        raise ParseError(f"bad magic {magic!r}", path=path, offset=0)
    if w == 0 or h == 0:
        raise ParseError(f"empty grid {w}x{h}", path=path, offset=4)
    expected = _DEPTH_HEADER.size + 4 * w * h
    if len(buf) != expected:
        raise ParseError(f"payload length {len(buf)} does not match {w}x{h} grid "
                         f"({expected} bytes)", path=path, offset=min(len(buf), expected))
    data = np.frombuffer(buf, dtype="<f4", count=w * h, offset=_DEPTH_HEADER.size)
    bad = ~(np.isfinite(data) & (data >= 0) & (data <= 1))
    if bad.any():
        first = int(np.argmax(bad))
        raise ParseError(f"value {data[first]!r} outside [0, 1]", path=path,
                         offset=_DEPTH_HEADER.size + 4 * first)
    return data.reshape(h, w).astype(np.float64)


def write_depth_grid(grid, path):
    Path(path).write_bytes(encode_depth_grid(grid))


def read_depth_grid(path) -> np.ndarray:
    return decode_depth_grid(Path(path).read_bytes(), path=path)


# -- PGM / PPM images --------------------------------------------------------

def _netpbm_header(buf: bytes, path):
    """Parse magic, width, height, maxval; return them and the payload offset."""
    pos = 0
    tokens = []
    n = len(buf)
    while len(tokens) < 4:
        while pos < n and (buf[pos:pos + 1].isspace() or buf[pos:pos + 1] == b"#"):
            if buf[pos:pos + 1] == b"#":
                while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ParseError("truncated header", path=path, offset=pos)
        tokens.append((buf[start:pos], start))
    if pos >= n or not buf[pos:pos + 1].isspace():
        raise ParseError("missing whitespace after header", path=path, offset=pos)
    magic, moff = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"unsupported image format {magic[:8]!r}", path=path, offset=moff)
    values = []
    for tok, off in tokens[1:]:
        if not tok.isdigit() or len(tok) > 9:
            raise ParseError(f"bad header field {tok[:16]!r}", path=path, offset=off)
        values.append(int(tok))
    w, h, maxval = values
    if w == 0 or h == 0:
        raise ParseError(f"empty image {w}x{h}", path=path, offset=tokens[1][1])
    if maxval != 255:
        raise ParseError(f"unsupported maxval {maxval}", path=path, offset=tokens[3][1])
    return magic, w, h, pos + 1


def decode_image(buf: bytes, path=None) -> np.ndarray:
    magic, w, h, off = _netpbm_header(buf, path)
    channels = 3 if magic == b"P6" else 1
    size = w * h * channels
    if len(buf) - off < size:
        raise ParseError(f"pixel data truncated: need {size} bytes, have {len(buf) - off}",
                         path=path, offset=len(buf))
    data = np.frombuffer(buf, dtype=np.uint8, count=size, offset=off).astype(float) / 255.0
    if channels == 1:
        return data.reshape(h, w)
    return to_luma(data.reshape(h, w, 3))


def encode_image(img) -> bytes:
    arr = as_grid(img)
    q = np.round(arr * 255.0).astype(np.uint8)
    h, w = arr.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + q.tobytes()


def read_image(path) -> np.ndarray:
    return decode_image(Path(path).read_bytes(), path=path)


def write_image(img, path):
    Path(path).write_bytes(encode_image(img))


# -- MOT text files ----------------------------------------------------------

@dataclass(frozen=True)
class MotRecord:
    frame: int
    id: int
    box: BBox
    confidence: float
    line: int = field(default=0, compare=False)


def _read_text(path) -> str:
    buf = Path(path).read_bytes()
    try:
        return buf.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("not valid UTF-8 text", path=path, offset=exc.start) from None


def parse_mot(text: str, path=None) -> list:
    """Parse ``frame,id,x,y,w,h,conf[,...]`` lines; trailing fields are ignored."""
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 7:
            raise ParseError(f"expected at least 7 fields, got {len(parts)}",
                             path=path, line=lineno)
        try:
            frame = int(parts[0])
            tid_f = float(parts[1])
            x, y, w, h, conf = (float(p) for p in parts[2:7])
        except ValueError as exc:
            raise ParseError(f"non-numeric field ({exc})", path=path, line=lineno) from None
        if not (math.isfinite(tid_f) and tid_f == int(tid_f)):
            raise ParseError(f"track id must be an integer, got {parts[1]!r}",
                             path=path, line=lineno)
        tid = int(tid_f)
        if frame < 1:
            raise ParseError(f"frame numbers start at 1, got {frame}", path=path, line=lineno)
        if not all(math.isfinite(v) for v in (x, y, w, h, conf)):
            raise ParseError("non-finite value", path=path, line=lineno)
        if w <= 0 or h <= 0:
            raise ParseError(f"box width and height must be positive, got {w}x{h}",
                             path=path, line=lineno)
        out.append(MotRecord(frame, tid, BBox.from_tlwh(x, y, w, h), conf, lineno))
    return out


def read_mot(path) -> list:
    return parse_mot(_read_text(path), path=path)


def read_detections(path) -> dict:
    """``{frame: [Detection, ...]}`` from a MOT-format detection file."""
    out = {}
    for rec in read_mot(path):
        conf = min(max(rec.confidence, 0.0), 1.0)
        out.setdefault(rec.frame, []).append(Detection(rec.box, conf))
    return out


def read_trajectories(path) -> TrajectorySet:
    ts = TrajectorySet()
    for rec in read_mot(path):
        try:
            ts.add(rec.frame, rec.id, rec.box)
        except InvalidArgumentError as exc:
            raise ParseError(str(exc), path=path, line=rec.line) from None
    return ts


def format_mot_line(frame: int, tid: int, box: BBox, confidence: float = 1.0) -> str:
    x, y, w, h = box.to_tlwh()
    return f"{frame},{tid},{x:.6f},{y:.6f},{w:.6f},{h:.6f},{confidence:.6f},-1,-1,-1\n"


def write_trajectories(path, entries):
    """Write ``(frame, id, box)`` or ``(frame, id, box, confidence)`` tuples."""
    with open(path, "w") as fh:
        for entry in entries:
            fh.write(format_mot_line(*entry))


def write_detections(path, detections: dict):
    """Write ``{frame: [Detection]}`` as MOT rows with id -1."""
    with open(path, "w") as fh:
        for frame in sorted(detections):
            for d in detections[frame]:
                fh.write(format_mot_line(frame, -1, d.box, d.confidence))


# -- poses -------------------------------------------------------------------

def write_poses(path, poses):
    with open(path, "w") as fh:
        for p in poses:
            fh.write(" ".join(repr(float(v)) for v in p.as_array()) + "\n")


def read_poses(path) -> list:
    out = []
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(f"expected 6 numbers, got {len(parts)}", path=path, line=lineno)
        try:
            vals = [float(v) for v in parts]
        except ValueError:
            raise ParseError("non-numeric pose value", path=path, line=lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite pose value", path=path, line=lineno)
        out.append(Pose6DoF(*vals))
    return out


# -- run configuration -------------------------------------------------------

DEFAULT_CAMERA = CameraIntrinsics(200.0, 200.0, 127.5, 79.5)


@dataclass(frozen=True)
class RunConfig:
    camera: CameraIntrinsics = DEFAULT_CAMERA
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    align: AlignConfig = field(default_factory=AlignConfig)
    d_min: float = DEFAULT_D_MIN
    d_max: float = DEFAULT_D_MAX


def _parse_bool(s):
    v = s.lower()
    if v in ("true", "on", "yes", "1"):
        return True
    if v in ("false", "off", "no", "0"):
        return False
    raise ValueError(f"expected a boolean (on/off/true/false), got {s!r}")


def _parse_int(s):
    return int(s)


def _parse_float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("value must be finite")
    return v


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return s
    return parse


def _positive(v):
    return v > 0


def _unit(v):
    return 0.0 <= v <= 1.0


def _open_unit(v):
    return 0.0 < v < 1.0


def _at_least(n):
    return lambda v: v >= n


# key -> (parser, range check, range description)
CONFIG_KEYS = {
    "camera.fx": (_parse_float, _positive, "> 0"),
    "camera.fy": (_parse_float, _positive, "> 0"),
    "camera.cx": (_parse_float, None, ""),
    "camera.cy": (_parse_float, None, ""),
    "tracker.high_thresh": (_parse_float, _unit, "in [0, 1]"),
    "tracker.low_thresh": (_parse_float, _unit, "in [0, 1]"),
    "tracker.new_track_thresh": (_parse_float, _unit, "in [0, 1]"),
    "tracker.iou_gate": (_parse_float, _open_unit, "in (0, 1)"),
    "tracker.n_levels": (_parse_int, _at_least(1), ">= 1"),
    "tracker.max_age": (_parse_int, _at_least(1), ">= 1"),
    "tracker.min_hits": (_parse_int, _at_least(1), ">= 1"),
    "tracker.byte_split": (_parse_bool, None, ""),
    "tracker.compensation": (_parse_bool, None, ""),
    "tracker.depth_cascade": (_parse_bool, None, ""),
    "tracker.box_depth": (_choice("bottom", "full"), None, ""),
    "align.pyramid_levels": (_parse_int, _at_least(1), ">= 1"),
    "align.max_evals_per_level": (_parse_int, _at_least(10), ">= 10"),
    "align.converge_tol": (_parse_float, _positive, "> 0"),
    "align.alpha": (_parse_float, _unit, "in [0, 1]"),
    "depth.d_min": (_parse_float, _positive, "> 0"),
    "depth.d_max": (_parse_float, _positive, "> 0"),
}


def parse_config(text: str, path=None) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown key")
        parser, check, desc = CONFIG_KEYS[key]
        try:
            parsed = parser(value)
        except ValueError as exc:
            raise ConfigError(key, f"type mismatch: {exc}") from None
        if check is not None and not check(parsed):
            raise ConfigError(key, f"value {parsed!r} out of range (must be {desc})")
        values[key] = parsed
    return build_config(values)


def build_config(values: dict) -> RunConfig:
    d_min = values.get("depth.d_min", DEFAULT_D_MIN)
    d_max = values.get("depth.d_max", DEFAULT_D_MAX)
    if not d_min < d_max:
        raise ConfigError("depth.d_max", f"must exceed depth.d_min ({d_min})")
    cam = {f: values.get(f"camera.{f}", getattr(DEFAULT_CAMERA, f))
           for f in ("fx", "fy", "cx", "cy")}
    tr = {f.name: values[f"tracker.{f.name}"] for f in fields(TrackerConfig)
          if f"tracker.{f.name}" in values}
    al = {f.name: values[f"align.{f.name}"] for f in fields(AlignConfig)
          if f"align.{f.name}" in values}
    try:
        tracker = TrackerConfig(**tr, d_min=d_min, d_max=d_max)
    except InvalidArgumentError as exc:
        raise ConfigError("tracker.low_thresh", str(exc)) from None
    return RunConfig(CameraIntrinsics(**cam), tracker,
                     AlignConfig(**al, d_min=d_min, d_max=d_max), d_min, d_max)


def read_config(path) -> RunConfig:
    return parse_config(_read_text(path), path=path)


def format_config(cfg: RunConfig, sections=("camera", "depth", "tracker", "align")) -> str:
    lines = []
    if "camera" in sections:
        for f in ("fx", "fy", "cx", "cy"):
            lines.append(f"camera.{f} = {getattr(cfg.camera, f)!r}")
    if "depth" in sections:
        lines += [f"depth.d_min = {cfg.d_min!r}", f"depth.d_max = {cfg.d_max!r}"]
    for name, obj in (("tracker", cfg.tracker), ("align", cfg.align)):
        if name not in sections:
            continue
        for f in fields(obj):
            key = f"{name}.{f.name}"
            if key not in CONFIG_KEYS:
                continue
            v = getattr(obj, f.name)
            lines.append(f"{key} = {('on' if v else 'off') if isinstance(v, bool) else v!r}"
                         .replace("'", ""))
    return "\n".join(lines) + "\n"


def write_config(cfg: RunConfig, path, sections=("camera", "depth")):
    Path(path).write_text(format_config(cfg, sections))


def with_overrides(cfg: RunConfig, **tracker_changes) -> RunConfig:
    return replace(cfg, tracker=replace(cfg.tracker, **tracker_changes))
