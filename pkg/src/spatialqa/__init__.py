"""Scene-graph construction and spatial QA tooling for depth bundles."""

__version__ = "0.1.0"

from .errors import SpatialQaError
from .geometry import CameraIntrinsics, DenoiseConfig, GravityPose, PointCloud
from .scenegraph import SceneBundle, SceneGraph, build_scene_graph
from .templates import QaCategory

__all__ = [
    "__version__",
    "SpatialQaError",
    "CameraIntrinsics",
    "DenoiseConfig",
    "GravityPose",
    "PointCloud",
    "SceneBundle",
    "SceneGraph",
    "build_scene_graph",
    "QaCategory",
]
