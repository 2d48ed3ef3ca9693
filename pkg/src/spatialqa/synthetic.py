"""Analytic test scenes: exact depth and masks from ray-plane/ray-box hits.

The renderer casts one ray per pixel through the pinhole model, intersects
it with a ground plane and axis-aligned boxes in closed form, and records
the camera-frame depth of the nearest hit. Masks mark the pixels owned by
each object, so bundles built here are exact by construction and make good
ground truth for the full pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    CameraIntrinsics,
    DepthRaster,
    Frame,
    GravityPose,
    InstanceMask,
    PointCloud,
    rotation_from_gravity,
)
from .scenegraph import SceneBundle


@dataclass(frozen=True)
class BoxSpec:
    """Axis-aligned box in world coordinates (x right, y forward, z up)."""

    label: str
    instance_id: int
    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]

    def center(self) -> tuple[float, float, float]:
        return tuple((lo + hi) / 2.0 for lo, hi in zip(self.min_corner, self.max_corner))

    def size(self) -> tuple[float, float, float]:
        return tuple(hi - lo for lo, hi in zip(self.min_corner, self.max_corner))


@dataclass(frozen=True)
class GroundSpec:
    """Ground plane z=0, masked as an instance over a bounded forward range."""

    label: str
    instance_id: int
    y_near: float
    y_far: float


def _ray_directions(width: int, height: int, intrinsics: CameraIntrinsics) -> np.ndarray:
    us, vs = np.meshgrid(np.arange(width), np.arange(height))
    dx = (us - intrinsics.cx) / intrinsics.fx
    dy = (vs - intrinsics.cy) / intrinsics.fy
    return np.stack([dx, dy, np.ones_like(dx, dtype=np.float64)], axis=-1)


def _intersect_ground(origin: np.ndarray, dirs_world: np.ndarray) -> np.ndarray:
    """Ray parameter t of the z=0 plane hit, +inf where the ray misses."""
    dz = dirs_world[..., 2]
    t = np.full(dz.shape, np.inf)
    going_down = dz < 0.0
    t[going_down] = -origin[2] / dz[going_down]
    return t


def _intersect_box(origin: np.ndarray, dirs_world: np.ndarray, box: BoxSpec) -> np.ndarray:
    """Slab-method ray parameter of the nearest box hit, +inf where missed."""
    lo = np.asarray(box.min_corner, dtype=np.float64) - origin
    hi = np.asarray(box.max_corner, dtype=np.float64) - origin
    t_near = np.full(dirs_world.shape[:2], -np.inf)
    t_far = np.full(dirs_world.shape[:2], np.inf)
    for axis in range(3):
        d = dirs_world[..., axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = lo[axis] / d
            t1 = hi[axis] / d
        tmin = np.minimum(t0, t1)
        tmax = np.maximum(t0, t1)
        parallel = d == 0.0
        if lo[axis] <= 0.0 <= hi[axis]:  # origin inside this slab
            tmin = np.where(parallel, -np.inf, tmin)
            tmax = np.where(parallel, np.inf, tmax)
        else:
            tmin = np.where(parallel, np.inf, tmin)
            tmax = np.where(parallel, -np.inf, tmax)
        t_near = np.maximum(t_near, tmin)
        t_far = np.minimum(t_far, tmax)
    hit = (t_near <= t_far) & (t_near > 0.0)
    return np.where(hit, t_near, np.inf)


def render_bundle(
    image_id: str,
    width: int,
    height: int,
    intrinsics: CameraIntrinsics,
    gravity: GravityPose,
    camera_height: float,
    boxes: list[BoxSpec],
    ground: GroundSpec | None = None,
) -> SceneBundle:
    """Render an exact depth raster plus per-object masks.

    The camera sits at (0, 0, camera_height) in world coordinates. Depth is
    the camera-frame z of the nearest hit; pixels that hit nothing get 0,
    which back-projection treats as invalid.
    """
    rotation = rotation_from_gravity(gravity)
    origin = np.array([0.0, 0.0, camera_height])
    dirs_cam = _ray_directions(width, height, intrinsics)
    dirs_world = dirs_cam @ rotation.T

    ts = [_intersect_box(origin, dirs_world, box) for box in boxes]
    t_ground = _intersect_ground(origin, dirs_world)
    all_ts = np.stack(ts + [t_ground], axis=0) if ts else t_ground[None]
    nearest = np.argmin(all_ts, axis=0)
    t_best = np.min(all_ts, axis=0)
    hit_any = np.isfinite(t_best)

    depth_values = np.where(hit_any, t_best, 0.0)
    depth = DepthRaster(width=width, height=height, values=depth_values)

    instances: list[InstanceMask] = []
    for idx, box in enumerate(boxes):
        owned = hit_any & (nearest == idx)
        instances.append(InstanceMask.encode(owned.astype(np.uint8), box.label, box.instance_id))
    if ground is not None:
        ground_idx = len(boxes)
        owned = hit_any & (nearest == ground_idx)
        hit_y = origin[1] + t_best * dirs_world[..., 1]
        owned &= (hit_y >= ground.y_near) & (hit_y <= ground.y_far)
        instances.append(InstanceMask.encode(owned.astype(np.uint8), ground.label, ground.instance_id))

    return SceneBundle(
        image_id=image_id,
        width=width,
        height=height,
        intrinsics=intrinsics,
        gravity=gravity,
        depth=depth,
        instances=instances,
    )


def two_box_scene(image_id: str = "two-box-scene") -> tuple[SceneBundle, dict]:
    """The reference validation scene: ground plane plus two known boxes.

    Camera 1.5 m above the ground, pitched 10 degrees down. Box a stands on
    the ground left of center; box b floats to the right, farther away and
    a full meter higher, so every pairwise relation has a wide margin.
    Returns the bundle and a dict of analytic ground-truth values.
    """
    intrinsics = CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0)
    gravity = GravityPose(pitch=np.deg2rad(-10.0), roll=0.0)
    box_a = BoxSpec("box a", 0, (-1.5, 3.3, 0.0), (-0.5, 3.5, 1.2))
    box_b = BoxSpec("box b", 1, (0.3, 4.6, 1.2), (1.5, 4.8, 2.0))
    ground = GroundSpec("floor", 2, 2.5, 6.5)
    camera_height = 1.5

    bundle = render_bundle(
        image_id,
        width=640,
        height=480,
        intrinsics=intrinsics,
        gravity=gravity,
        camera_height=camera_height,
        boxes=[box_a, box_b],
        ground=ground,
    )

    center_a = np.array(box_a.center()) - np.array([0.0, 0.0, camera_height])
    center_b = np.array(box_b.center()) - np.array([0.0, 0.0, camera_height])
    delta = center_b - center_a
    truth = {
        "box_a": box_a,
        "box_b": box_b,
        "ground": ground,
        "camera_height": camera_height,
        "width_a": box_a.size()[0],
        "height_a": box_a.size()[2],
        "width_b": box_b.size()[0],
        "height_b": box_b.size()[2],
        "direct_distance": float(np.linalg.norm(delta)),
        "horizontal_distance": float(np.hypot(delta[0], delta[1])),
        "vertical_distance": float(abs(delta[2])),
    }
    return bundle, truth


def ground_plane_camera_cloud(
    gravity: GravityPose,
    camera_height: float,
    count: int,
    rng: np.random.Generator,
    extent: float = 10.0,
) -> PointCloud:
    """Random ground-plane points expressed in the camera frame.

    World points with z=0 are drawn uniformly in a square around the
    camera, then rotated into the camera frame of the given pose. After
    canonicalization their z must collapse back to -camera_height.
    """
    xy = rng.uniform(-extent, extent, size=(count, 2))
    world = np.column_stack([xy, np.zeros(count)])
    origin = np.array([0.0, 0.0, camera_height])
    rotation = rotation_from_gravity(gravity)
    camera_points = (world - origin) @ rotation  # inverse rotation: R.T applied row-wise
    return PointCloud(camera_points, Frame.CAMERA)
