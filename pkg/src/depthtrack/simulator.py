"""Deterministic synthetic scenes with exact depth, pose and track ground truth.

A pitched camera looks down on a value-noise textured ground plane. Objects
are textured vertical billboards standing on the plane, so the bottom edge of
every ground-truth box touches the ground.

World frame: X right, Y down (the ground is ``Y = 0``), Z forward. The
inter-frame pose of frame ``t`` maps camera coordinates of frame ``t-1`` into
camera coordinates of frame ``t``; frame 0 carries the zero pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import InvalidArgumentError
from .geometry import (DEFAULT_D_MAX, DEFAULT_D_MIN, CameraIntrinsics, Pose6DoF,
                       RigidTransform, depth_to_disparity, disparity_to_depth,
                       pose_to_transform)
from .motion import BBox

SKY_INTENSITY = 0.5
_NOISE_TABLE = 256


@dataclass(frozen=True)
class ObjectSpec:
    """A billboard of ``size = (width, height)`` standing at ground ``(X, Z)``.

    ``turns`` holds ``(frame, (vx, vz))`` pairs that replace the velocity from
    that frame on.
    """

    position: tuple
    velocity: tuple = (0.0, 0.0)
    size: tuple = (1.0, 1.5)
    spawn_frame: int = 0
    despawn_frame: int | None = None
    turns: tuple = ()
    intensity: float | None = None


@dataclass(frozen=True)
class SceneSpec:
    width: int = 256
    height: int = 160
    fx: float = 200.0
    fy: float = 200.0
    cx: float | None = None
    cy: float | None = None
    camera_height: float = 5.0
    pitch: float = math.radians(50.0)
    frame_count: int = 2
    #: per-frame camera motion, 6 numbers in Pose6DoF order
    base_motion: tuple = (0.0,) * 6
    #: ``(frame, 6 numbers)`` offsets added to ``base_motion`` at that frame
    jerks: tuple = ()
    objects: tuple = ()
    texture_seed: int = 0
    texture_cell: float = 0.2
    d_min: float = DEFAULT_D_MIN
    d_max: float = DEFAULT_D_MAX

    @property
    def intrinsics(self) -> CameraIntrinsics:
        cx = (self.width - 1) / 2.0 if self.cx is None else self.cx
        cy = (self.height - 1) / 2.0 if self.cy is None else self.cy
        return CameraIntrinsics(self.fx, self.fy, cx, cy)

    def validate(self):
        if self.width < 2 or self.height < 2:
            raise InvalidArgumentError("image must be at least 2x2")
        if not self.camera_height > 0:
            raise InvalidArgumentError("camera height must be positive")
        if self.frame_count < 2:
            raise InvalidArgumentError("frame count must be >= 2")
        if not self.texture_cell > 0:
            raise InvalidArgumentError("texture cell must be positive")
        if not 0 < self.d_min < self.d_max:
            raise InvalidArgumentError("need 0 < d_min < d_max")
        if len(self.base_motion) != 6:
            raise InvalidArgumentError("base_motion needs 6 values")
        for frame, offset in self.jerks:
            if len(offset) != 6 or not 1 <= frame < self.frame_count:
                raise InvalidArgumentError(f"bad jerk entry at frame {frame}")
        for i, obj in enumerate(self.objects):
            if len(obj.size) != 2 or min(obj.size) <= 0:
                raise InvalidArgumentError(f"object {i}: footprint must be positive")
            if obj.spawn_frame < 0:
                raise InvalidArgumentError(f"object {i}: negative spawn frame")
        self.intrinsics  # raises on bad intrinsics


@dataclass
class SceneFrame:
    image: np.ndarray
    depth: np.ndarray
    pose: Pose6DoF
    gt_boxes: list  # [(id, BBox)]


@dataclass(eq=False)
class Scene:
    spec: SceneSpec
    seed: int
    ground_table: np.ndarray
    object_tables: list
    object_intensity: np.ndarray
    poses: list          # inter-frame Pose6DoF, index = frame
    cam_to_world: list   # RigidTransform per frame
    object_paths: np.ndarray  # (n_objects, frame_count, 2) ground X, Z; nan = absent
    _frames: dict = field(default_factory=dict, repr=False)

    @property
    def frame_count(self) -> int:
        return self.spec.frame_count


def _value_noise(table: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Periodic smooth value noise sampled at lattice coordinates ``(x, y)``."""
    n = table.shape[0]
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    fx = fx * fx * (3 - 2 * fx)
    fy = fy * fy * (3 - 2 * fy)
    i0 = x0.astype(np.int64) % n
    j0 = y0.astype(np.int64) % n
    i1 = (i0 + 1) % n
    j1 = (j0 + 1) % n
    a = table[j0, i0] * (1 - fx) + table[j0, i1] * fx
    b = table[j1, i0] * (1 - fx) + table[j1, i1] * fx
    return a * (1 - fy) + b * fy


def _texture(table, x, y, cell):
    """Two octaves of value noise mapped into [0.1, 0.9]."""
    v = 0.65 * _value_noise(table, x / (2 * cell), y / (2 * cell))
    v += 0.35 * _value_noise(table.T, x / cell + 17.3, y / cell + 5.1)
    return 0.1 + 0.8 * v


def _initial_camera(spec: SceneSpec) -> RigidTransform:
    s, c = math.sin(spec.pitch), math.cos(spec.pitch)
    # columns: camera x, y, z axes expressed in world coordinates
    r = np.array([[1.0, 0.0, 0.0],
                  [0.0, c, s],
                  [0.0, -s, c]])
    return RigidTransform(r, np.array([0.0, -spec.camera_height, 0.0]))


def _object_path(obj: ObjectSpec, frames: int) -> np.ndarray:
    path = np.full((frames, 2), np.nan)
    turns = dict((int(f), v) for f, v in obj.turns)
    pos = np.array(obj.position, dtype=float)
    vel = np.array(obj.velocity, dtype=float)
    end = frames if obj.despawn_frame is None else min(frames, obj.despawn_frame)
    for t in range(obj.spawn_frame, end):
        if t in turns:
            vel = np.array(turns[t], dtype=float)
        if t > obj.spawn_frame:
            pos = pos + vel
        path[t] = pos
    return path


def build_scene(spec: SceneSpec, seed: int = 0) -> Scene:
    spec.validate()
    rng = np.random.default_rng([spec.texture_seed, seed])
    ground = rng.random((_NOISE_TABLE, _NOISE_TABLE))
    tables = [rng.random((64, 64)) for _ in spec.objects]
    intensity = np.array([
        obj.intensity if obj.intensity is not None else rng.uniform(0.25, 0.75)
        for obj in spec.objects])

    jerks = {}
    for frame, offset in spec.jerks:
        jerks[frame] = jerks.get(frame, np.zeros(6)) + np.asarray(offset, dtype=float)
    poses = [Pose6DoF()]
    c2w = [_initial_camera(spec)]
    base = np.asarray(spec.base_motion, dtype=float)
    for t in range(1, spec.frame_count):
        p = Pose6DoF.from_array(base + jerks.get(t, 0.0))
        poses.append(p)
        c2w.append(c2w[-1].compose(pose_to_transform(p).inverse()))

    paths = np.stack([_object_path(o, spec.frame_count) for o in spec.objects]) \
        if spec.objects else np.zeros((0, spec.frame_count, 2))
    return Scene(spec, seed, ground, tables, intensity, poses, c2w, paths)


def _billboard_corners(pos, size):
    x, z = pos
    w, h = size
    return np.array([[x - w / 2, -h, z], [x + w / 2, -h, z],
                     [x - w / 2, 0.0, z], [x + w / 2, 0.0, z]])


def render(scene: Scene, t: int) -> SceneFrame:
    spec = scene.spec
    if not 0 <= t < spec.frame_count:
        raise InvalidArgumentError(f"frame {t} outside [0, {spec.frame_count})")
    if t in scene._frames:
        return scene._frames[t]

    k = spec.intrinsics
    h, w = spec.height, spec.width
    c2w = scene.cam_to_world[t]
    vv, uu = np.mgrid[0:h, 0:w].astype(float)
    ray_cam = np.stack([(uu - k.cx) / k.fx, (vv - k.cy) / k.fy, np.ones_like(uu)], axis=-1)
    ray = ray_cam @ c2w.r.T
    origin = c2w.tau

    # camera-frame z of a hit equals the ray parameter since ray_cam.z == 1
    z = np.full((h, w), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        s_ground = np.where(ray[..., 1] > 0, -origin[1] / ray[..., 1], np.inf)
    z = np.minimum(z, s_ground)
    gx = origin[0] + s_ground * ray[..., 0]
    gz = origin[2] + s_ground * ray[..., 2]
    finite = np.isfinite(s_ground)
    image = np.full((h, w), SKY_INTENSITY)
    image[finite] = _texture(scene.ground_table, gx[finite], gz[finite], spec.texture_cell)

    gt = []
    w2c = c2w.inverse()
    for i, obj in enumerate(spec.objects):
        pos = scene.object_paths[i, t]
        if np.isnan(pos[0]):
            continue
        bw, bh = obj.size
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(ray[..., 2] > 0, (pos[1] - origin[2]) / ray[..., 2], np.inf)
        hx = origin[0] + s * ray[..., 0] - (pos[0] - bw / 2)
        hy = origin[1] + s * ray[..., 1] + bh
        hit = (s > 0) & (s < z) & (hx >= 0) & (hx <= bw) & (hy >= 0) & (hy <= bh)
        if hit.any():
            z = np.where(hit, s, z)
            tex = _texture(scene.object_tables[i], hx[hit], hy[hit], spec.texture_cell / 2)
            image[hit] = np.clip(scene.object_intensity[i] + 0.5 * (tex - 0.5), 0.1, 0.9)

        corners = w2c.apply(_billboard_corners(pos, obj.size))
        if np.any(corners[:, 2] <= 0):
            continue
        u = k.fx * corners[:, 0] / corners[:, 2] + k.cx
        v = k.fy * corners[:, 1] / corners[:, 2] + k.cy
        x0, x1 = max(u.min(), 0.0), min(u.max(), w - 1.0)
        y0, y1 = max(v.min(), 0.0), min(v.max(), h - 1.0)
        if x1 > x0 and y1 > y0:
            gt.append((i + 1, BBox(float(x0), float(y0), float(x1), float(y1))))

    depth = np.where(np.isfinite(z), depth_to_disparity(np.where(np.isfinite(z), z, 1.0),
                                                        spec.d_min, spec.d_max), 0.0)
    frame = SceneFrame(image, depth, scene.poses[t], gt)
    scene._frames[t] = frame
    return frame


def metric_depth(scene: Scene, t: int) -> np.ndarray:
    """Camera-frame z of every pixel's hit (inf where the ray escapes)."""
    d = render(scene, t).depth
    return disparity_to_depth(d, scene.spec.d_min, scene.spec.d_max)


def ground_depth(spec: SceneSpec, cam_to_world: RigidTransform, u, v):
    """Closed-form camera z of the ray through ``(u, v)`` hitting the ground plane."""
    k = spec.intrinsics
    ray = np.array([(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0]) @ cam_to_world.r.T
    if ray[1] <= 0:
        return math.inf
    return -cam_to_world.tau[1] / ray[1]


def detections_from_gt(gt_boxes, rng: np.random.Generator, jitter: float = 0.0,
                       confidence: float = 0.9):
    """Noisy detections ``[(BBox, confidence)]`` derived from ground-truth boxes."""
    out = []
    for _, b in gt_boxes:
        if jitter > 0:
            d = rng.normal(0.0, jitter, 4)
            b = BBox(b.x0 + d[0], b.y0 + d[1], max(b.x1 + d[2], b.x0 + d[0] + 1.0),
                     max(b.y1 + d[3], b.y0 + d[1] + 1.0))
        out.append((b, confidence))
    return out


# ---------------------------------------------------------------- presets

def pair_spec(motion=(0.0,) * 6, texture_seed: int = 0) -> SceneSpec:
    """Two frames of an empty textured ground seen under ``motion``."""
    return SceneSpec(frame_count=2, base_motion=tuple(motion), texture_seed=texture_seed)


def crossing_spec(frames: int = 40, offset_px: float = 3.5, speed_px: float = 5.0,
                  turn: int = 21) -> SceneSpec:
    """Two pedestrians at depths 6 and 7.5 approach, overlap and bounce apart.

    A low camera keeps both near the same image row, so at frame ``turn - 1``
    the boxes overlap heavily (horizontal offset ``offset_px``). Each then
    reverses direction, so identity is only recoverable from depth.
    """
    f = 200.0
    za, zb = 6.0, 7.5
    va, vb = speed_px * za / f, speed_px * zb / f
    xa = -offset_px / 2 / f * za
    xb = offset_px / 2 / f * zb
    n = turn - 1
    near = ObjectSpec(position=(xa - n * va, za), velocity=(va, 0.0), size=(0.84, 1.7),
                      intensity=0.3, turns=((turn, (-va, 0.0)),))
    far = ObjectSpec(position=(xb + n * vb, zb), velocity=(-vb, 0.0), size=(1.05, 2.12),
                     intensity=0.7, turns=((turn, (vb, 0.0)),))
    return SceneSpec(fx=f, fy=f, camera_height=1.5, pitch=math.radians(8.0),
                     frame_count=frames, objects=(near, far))


def jerk_spec(frames: int = 45, yaw_deg: float = 6.0, shift: float = 0.3) -> SceneSpec:
    """Four slow walkers under a camera that jerks abruptly at frames 12, 22 and 32.

    The first two jerks are opposite yaw steps of ``yaw_deg``, the third a
    sideways translation of ``shift`` units.
    """
    j = math.radians(yaw_deg)
    walkers = (ObjectSpec(position=(-1.5, 5.0), velocity=(0.02, 0.0), size=(0.6, 1.2)),
               ObjectSpec(position=(0.0, 6.0), velocity=(0.0, 0.02), size=(0.6, 1.2)),
               ObjectSpec(position=(1.5, 5.5), velocity=(-0.02, 0.0), size=(0.6, 1.2)),
               ObjectSpec(position=(0.5, 4.2), velocity=(0.01, -0.01), size=(0.6, 1.2)))
    jerks = ((12, (0.0, j, 0.0, 0.0, 0.0, 0.0)),
             (22, (0.0, -j, 0.0, 0.0, 0.0, 0.0)),
             (32, (0.0, 0.0, 0.0, shift, 0.0, 0.0)))
    return SceneSpec(camera_height=5.0, pitch=math.radians(40.0), frame_count=frames,
                     jerks=tuple(j for j in jerks if j[0] < frames), objects=walkers)


JERK_FRAMES = (12, 22, 32)


def walk_spec(frames: int = 30) -> SceneSpec:
    """The jerk scene's walkers under a smooth, slowly panning camera."""
    base = jerk_spec(frames)
    return replace(base, jerks=(), base_motion=(0.0, 0.004, 0.0, 0.01, 0.0, 0.0))


PRESETS = {"walk": walk_spec, "crossing": crossing_spec, "jerk": jerk_spec}


def _tuples(v):
    return tuple(_tuples(x) for x in v) if isinstance(v, (list, tuple)) else v


def spec_from_mapping(data: dict) -> SceneSpec:
    """Build a :class:`SceneSpec` from plain (e.g. JSON-decoded) data."""
    if not isinstance(data, dict):
        raise InvalidArgumentError("scene description must be a mapping")
    known = {f.name for f in fields(SceneSpec)}
    unknown = set(data) - known
    if unknown:
        raise InvalidArgumentError(f"unknown scene keys: {', '.join(sorted(unknown))}")
    kw = {k: _tuples(v) for k, v in data.items() if k != "objects"}
    objs = []
    obj_known = {f.name for f in fields(ObjectSpec)}
    for i, o in enumerate(data.get("objects", ())):
        if not isinstance(o, dict) or set(o) - obj_known:
            raise InvalidArgumentError(f"object {i}: bad description")
        objs.append(ObjectSpec(**{k: _tuples(v) for k, v in o.items()}))
    try:
        spec = SceneSpec(**kw, objects=tuple(objs))
    except TypeError as exc:
        raise InvalidArgumentError(str(exc)) from None
    spec.validate()
    return spec
