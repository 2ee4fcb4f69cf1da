"""Command-line entry points: synth, track, pose, warp, evaluate, losses.

Exit codes: 0 success, 1 runtime error, 2 usage error (bad flags, missing
inputs, invalid configuration). ``DEPTHTRACK_LOG`` selects stderr verbosity
(``quiet``, ``info`` or ``debug``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import formats
from .association import TrackerConfig
from .errors import ConfigError, DepthTrackError, InvalidArgumentError, UnreliablePoseError
from .geometry import Pose6DoF, pose_to_transform
from .imaging import photometric_error, synthesize_view
from .losses import fixture_table
from .metrics import clear_metrics
from .pipeline import EstimatedPoses, simulate_detections, track_sequence
from .pose_align import estimate_pose
from .simulator import PRESETS, build_scene, render, spec_from_mapping

log = logging.getLogger("depthtrack")

LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _require(path: Path, what: str):
    if not path.exists():
        raise UsageError(f"{what} not found: {path}")
    return path


def _load_config(path: Path):
    _require(path, "config")
    try:
        return formats.read_config(path)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


# -- synth -------------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.scene is not None:
        try:
            data = json.loads(_require(Path(args.scene), "scene file").read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.scene}: invalid JSON: {exc}") from None
        try:
            spec = spec_from_mapping(data)
        except InvalidArgumentError as exc:
            raise UsageError(f"{args.scene}: {exc}") from None
    else:
        spec = PRESETS[args.preset]()
    if args.frames is not None:
        if args.frames < 2:
            raise UsageError("--frames must be >= 2")
        spec = replace(spec, frame_count=args.frames)

    out = Path(args.output)
    (out / "img").mkdir(parents=True, exist_ok=True)
    (out / "depth").mkdir(exist_ok=True)
    scene = build_scene(spec, args.seed)
    gt_rows, poses = [], []
    for t in range(scene.frame_count):
        fr = render(scene, t)
        formats.write_image(fr.image, out / "img" / f"{t + 1:06d}.pgm")
        formats.write_depth_grid(fr.depth, out / "depth" / f"{t + 1:06d}.dpt")
        gt_rows.extend((t + 1, gid, box) for gid, box in fr.gt_boxes)
        poses.append(fr.pose)
        log.debug("rendered frame %d (%d objects)", t + 1, len(fr.gt_boxes))
    formats.write_trajectories(out / "gt.txt", gt_rows)
    dets = simulate_detections(scene, args.seed, args.jitter, args.confidence)
    formats.write_detections(out / "det.txt", dets)
    formats.write_poses(out / "poses.txt", poses)
    cfg = formats.RunConfig(camera=spec.intrinsics, d_min=spec.d_min, d_max=spec.d_max)
    formats.write_config(cfg, out / "config")
    print(f"frames {scene.frame_count}")
    print(f"objects {len(spec.objects)}")
    return EXIT_OK


# -- track -------------------------------------------------------------------

def _frame_files(folder: Path, suffixes):
    return sorted(p for p in folder.iterdir() if p.suffix in suffixes)


def cmd_track(args) -> int:
    root = Path(args.dataset)
    _require(root, "dataset directory")
    depth_dir = _require(root / "depth", "depth directory")
    img_dir = _require(root / "img", "image directory")
    run = _load_config(Path(args.config) if args.config else root / "config")
    det_path = _require(Path(args.detections) if args.detections else root / "det.txt",
                        "detections")
    depth_files = _frame_files(depth_dir, {".dpt"})
    if not depth_files:
        raise UsageError(f"no depth grids in {depth_dir}")
    pose_path = root / "poses.txt"
    if args.poses == "file":
        _require(pose_path, "pose file")
    img_files = _frame_files(img_dir, {".pgm", ".ppm"})
    if args.poses == "estimate" and len(img_files) != len(depth_files):
        raise UsageError(f"{len(img_files)} images but {len(depth_files)} depth grids")

    changes = {}
    if args.no_compensation:
        changes["compensation"] = False
    if args.no_cascade:
        changes["depth_cascade"] = False
    if args.levels is not None:
        changes["n_levels"] = args.levels
    try:
        run = formats.with_overrides(run, **changes)
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from None
    cfg: TrackerConfig = run.tracker

    out = Path(args.output)
    rows = []
    try:
        detections = formats.read_detections(det_path)
        depths = _LazyGrids(depth_files, formats.read_depth_grid)
        poses = None
        if args.poses == "file":
            poses = formats.read_poses(pose_path)
            if len(poses) < len(depth_files):
                raise formats.ParseError(f"{len(poses)} poses for {len(depth_files)} frames",
                                         path=pose_path)
        elif args.poses == "estimate":
            images = _LazyGrids(img_files, formats.read_image)
            poses = _TolerantPoses(EstimatedPoses(images, depths, run.camera, run.align))
        track_sequence(depths, detections, run.camera, cfg, poses,
                       on_frame=lambda frame, r: rows.extend(r))
    except DepthTrackError:
        formats.write_trajectories(out, rows)
        log.error("partial output (%d rows) written to %s", len(rows), out)
        raise
    formats.write_trajectories(out, rows)
    print(f"frames {len(depth_files)}")
    print(f"tracks {len({tid for _, tid, _ in rows})}")
    return EXIT_OK


class _LazyGrids:
    """Read frame files on first access, keeping them cached."""

    def __init__(self, paths, reader):
        self.paths = paths
        self.reader = reader
        self._cache = {}

    def __len__(self):
        return len(self.paths)

    def __getitem__(self, i):
        if i not in self._cache:
            self._cache[i] = self.reader(self.paths[i])
        return self._cache[i]


class _TolerantPoses:
    """Estimated poses where an unreliable pair means "no compensation"."""

    def __init__(self, inner):
        self.inner = inner

    def __len__(self):
        return len(self.inner)

    def __getitem__(self, i):
        try:
            return self.inner[i]
        except UnreliablePoseError as exc:
            log.warning("frame %d: %s; skipping compensation", i + 1, exc)
            return None


# -- pose / warp -------------------------------------------------------------

def _camera_config(args):
    return _load_config(Path(args.config)) if args.config else formats.RunConfig()


def cmd_pose(args) -> int:
    for p in (args.previous, args.current, args.depth):
        _require(Path(p), "input")
    run = _camera_config(args)
    prev = formats.read_image(args.previous)
    cur = formats.read_image(args.current)
    depth = formats.read_depth_grid(args.depth)
    est = estimate_pose(cur, prev, depth, run.camera, run.align)
    for v in est.pose.as_array():
        print(repr(float(v)))
    print(repr(est.residual))
    log.info("valid fraction %.3f", est.valid_fraction)
    return EXIT_OK


def cmd_warp(args) -> int:
    for p in (args.source, args.target, args.depth):
        _require(Path(p), "input")
    run = _camera_config(args)
    source = formats.read_image(args.source)
    target = formats.read_image(args.target)
    depth = formats.read_depth_grid(args.depth)
    t = pose_to_transform(Pose6DoF(*args.pose))
    img, valid = synthesize_view(source, depth, run.camera, t, run.d_min, run.d_max)
    err = photometric_error(img, target, run.align.alpha, valid)
    img = img.copy()
    img[~valid] = 0.0
    formats.write_image(img, args.output)
    print(repr(err.mean()))
    return EXIT_OK


# -- evaluate / losses -------------------------------------------------------

def cmd_evaluate(args) -> int:
    _require(Path(args.gt), "ground truth")
    _require(Path(args.pred), "predictions")
    if not 0.0 < args.iou_gate < 1.0:
        raise UsageError("--iou-gate must lie in (0, 1)")
    gt = formats.read_trajectories(args.gt)
    pred = formats.read_trajectories(args.pred)
    sys.stdout.write(clear_metrics(gt, pred, args.iou_gate).format())
    return EXIT_OK


def cmd_losses(args) -> int:
    worst = 0.0
    for name, got, want in fixture_table():
        print(f"{name} {got:.6f} {want:.6f}")
        worst = max(worst, abs(got - want))
    return EXIT_OK if worst < 1e-9 else EXIT_RUNTIME


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="depthtrack", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic dataset directory")
    p.add_argument("output")
    p.add_argument("--preset", choices=sorted(PRESETS), default="walk")
    p.add_argument("--scene", help="JSON scene description (overrides --preset)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int)
    p.add_argument("--jitter", type=float, default=0.3, help="detection noise (px)")
    p.add_argument("--confidence", type=float, default=0.9)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("track", help="track a dataset directory")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--detections", help="MOT detections (default <dataset>/det.txt)")
    p.add_argument("--config", help="config file (default <dataset>/config)")
    p.add_argument("--no-compensation", action="store_true")
    p.add_argument("--no-cascade", action="store_true")
    p.add_argument("--levels", type=int)
    p.add_argument("--poses", choices=("file", "estimate", "off"), default="file")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("pose", help="estimate camera motion between two frames")
    p.add_argument("previous")
    p.add_argument("current")
    p.add_argument("depth", help="disparity grid of the previous frame")
    p.add_argument("--config")
    p.set_defaults(func=cmd_pose)

    p = sub.add_parser("warp", help="synthesize the target view from the source image")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("depth", help="disparity grid of the target frame")
    p.add_argument("--pose", type=float, nargs=6, required=True,
                   metavar=("TX_ROT", "TY_ROT", "TZ_ROT", "TX", "TY", "TZ"))
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("evaluate", help="CLEAR-MOT and IDF1 scores")
    p.add_argument("gt")
    p.add_argument("pred")
    p.add_argument("--iou-gate", type=float, default=0.5)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("losses", help="print the loss-kernel self-check table")
    p.set_defaults(func=cmd_losses)
    return ap


def _setup_logging() -> bool:
    name = os.environ.get("DEPTHTRACK_LOG", "quiet").strip().lower()
    if name not in LOG_LEVELS:
        print(f"error: DEPTHTRACK_LOG must be one of {', '.join(LOG_LEVELS)}, got {name!r}",
              file=sys.stderr)
        return False
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("depthtrack")
    root.handlers[:] = [handler]
    root.setLevel(LOG_LEVELS[name])
    root.propagate = False
    return True


def main(argv=None) -> int:
    if not _setup_logging():
        return EXIT_USAGE
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DepthTrackError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
