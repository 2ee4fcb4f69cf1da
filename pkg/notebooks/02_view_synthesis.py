"""Render a synthetic pair, warp one frame into the other, and look at the error.

Run: python notebooks/02_view_synthesis.py [output-dir]
"""

import sys
from pathlib import Path

import numpy as np

from depthtrack.formats import write_image
from depthtrack.geometry import Pose6DoF, pose_to_transform
from depthtrack.imaging import photometric_error, synthesize_view
from depthtrack.simulator import build_scene, pair_spec, render

out = Path(sys.argv[1] if len(sys.argv) > 1 else "view_synthesis")
out.mkdir(exist_ok=True)

scene = build_scene(pair_spec((0.0, 0.02, 0.0, 0.05, 0.0, 0.05)), seed=4)
target, source = render(scene, 0), render(scene, 1)
k = scene.spec.intrinsics
print("true motion:", np.round(scene.poses[1].as_array(), 4))

for label, pose in (("true pose", scene.poses[1]), ("zero pose", Pose6DoF(0, 0, 0, 0, 0, 0))):
    img, valid = synthesize_view(source.image, target.depth, k, pose_to_transform(pose))
    err = photometric_error(img, target.image, valid=valid)
    print(f"{label:9s}: valid {valid.mean():.3f}, mean |diff| "
          f"{np.abs(img - target.image)[valid].mean():.4f}, mean pe {err.mean():.4f}")
    write_image(np.where(valid, img, 0.0), out / f"warp_{label.split()[0]}.pgm")

write_image(target.image, out / "target.pgm")
write_image(source.image, out / "source.pgm")
print("images written to", out)
