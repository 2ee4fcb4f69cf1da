"""Pinhole geometry walkthrough: disparity to depth, and moving a pixel between views.

Run: python notebooks/01_geometry.py
"""

import numpy as np

from depthtrack.geometry import (CameraIntrinsics, Pose6DoF, depth_to_disparity,
                                 disparity_to_depth, pose_to_transform, reproject_point)

k = CameraIntrinsics(200, 200, 127.5, 79.5)

# Disparity maps are normalised inverse depth; 0 is the far limit, 1 the near one.
for d in (0.0, 0.001, 0.01, 0.1, 1.0):
    print(f"disparity {d:5.3f} -> depth {disparity_to_depth(d):8.3f} m")
print("round trip at 7.5 m:", disparity_to_depth(depth_to_disparity(7.5)))

# Step the camera 0.2 m to the right and yaw it by 3 degrees.
move = pose_to_transform(Pose6DoF(0.0, np.radians(3), 0.0, -0.2, 0.0, 0.0))
for z in (2.0, 10.0, 50.0):
    u, v, z2 = reproject_point(160.0, 100.0, z, k, move)
    print(f"pixel (160, 100) at {z:4.1f} m lands at ({u:7.2f}, {v:6.2f}), depth {z2:.3f}")

# Near points shift more than far ones: that parallax is what depth buys us.
back = reproject_point(*reproject_point(160.0, 100.0, 10.0, k, move), k, move.inverse())
print("after moving back:", np.round(back, 9))
