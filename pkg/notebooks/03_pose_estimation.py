"""Recover camera motion between two frames by direct photometric alignment.

Run: python notebooks/03_pose_estimation.py
"""

import math
import time

import numpy as np

from depthtrack.geometry import Pose6DoF
from depthtrack.pose_align import estimate_pose, photometric_objective
from depthtrack.simulator import build_scene, pair_spec, render

motions = {
    "sideways 5 cm": (0, 0, 0, 0.05, 0, 0),
    "forward 8 cm": (0, 0, 0, 0, 0, 0.08),
    "yaw 1.5 deg": (0, math.radians(1.5), 0, 0, 0, 0),
    "mixed": (math.radians(0.5), math.radians(-1), 0.0, 0.03, -0.01, 0.04),
}

for i, (name, motion) in enumerate(motions.items()):
    scene = build_scene(pair_spec(motion, texture_seed=i), seed=i)
    f0, f1 = render(scene, 0), render(scene, 1)
    k = scene.spec.intrinsics
    start = time.perf_counter()
    est = estimate_pose(f1.image, f0.image, f0.depth, k)
    took = time.perf_counter() - start
    zero = photometric_objective(Pose6DoF(0, 0, 0, 0, 0, 0), f1.image, f0.image, f0.depth, k)
    got, want = est.pose.as_array(), np.asarray(motion, dtype=float)
    print(f"{name}:")
    print(f"  truth     {np.round(want, 4)}")
    print(f"  estimate  {np.round(got, 4)}")
    print(f"  objective {zero:.4f} at zero -> {est.residual:.5f}, "
          f"{sum(len(t) for t in est.trace)} evaluations, {took:.1f} s")
