"""Depth-aware multi-object tracking: geometry, direct pose alignment, depth
cascade association, camera-motion compensation and evaluation tools."""

from .association import (Detection, MatchResult, TrackerConfig, TrackerState, box_depth,
                          depth_cascade_match, iou, iou_matrix, linear_assignment,
                          step_tracker)
from .errors import (ConfigError, DegenerateInputError, DepthTrackError,
                     InvalidArgumentError, ParseError, TransitionError, UnreliablePoseError)
from .geometry import (CameraIntrinsics, Pose6DoF, RigidTransform, backproject,
                       depth_to_disparity, disparity_to_depth, pose_to_transform, project,
                       reproject_point, transform_to_pose)
from .imaging import ErrorMap, photometric_error, ssim_map, synthesize_view
from .metrics import MetricsReport, TrajectorySet, clear_metrics, idf1
from .motion import BBox, KalmanState, Track, TrackStatus, compensate_box
from .pose_align import AlignConfig, PoseEstimate, estimate_pose
from .simulator import ObjectSpec, SceneSpec, build_scene, render

__version__ = "0.1.0"
