"""Geometric core: depth back-projection, gravity canonicalization, denoising.

Coordinate conventions used throughout the package:

* camera frame: x right, y down, z forward along the optical axis, meters
* canonical frame: x right, y forward, z up, meters; gravity points to -z

Depth pixels are lifted into the camera frame, rotated into the canonical
frame with the camera's gravity pose, and denoised before anything is
measured. Pixel (u, v) refers to integer pixel coordinates; the principal
point lives in the same coordinate system.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloudError, FrameError, InputShapeError

NOISE = -1  # dbscan label for points that belong to no cluster


class Frame(enum.Enum):
    CAMERA = "camera"
    CANONICAL = "canonical"


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixel units."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if self.cx < 0.0 or self.cy < 0.0:
            raise ValueError(f"principal point must be non-negative, got cx={self.cx} cy={self.cy}")


@dataclass(frozen=True)
class GravityPose:
    """Camera attitude relative to gravity, radians.

    pitch is the elevation of the optical axis: positive tilts the camera
    up, negative down, -pi/2 looks straight at the ground. roll rotates
    around the optical axis.
    """

    pitch: float
    roll: float

    def __post_init__(self):
        if not -math.pi / 2 <= self.pitch <= math.pi / 2:
            raise ValueError(f"pitch out of [-pi/2, pi/2]: {self.pitch}")
        if not -math.pi < self.roll <= math.pi:
            raise ValueError(f"roll out of (-pi, pi]: {self.roll}")


@dataclass
class DepthRaster:
    """Row-major metric depth, shape (height, width), meters.

    A pixel is invalid when its value is non-finite or <= 0; invalid
    pixels never produce points.
    """

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.height, self.width):
            raise InputShapeError(
                f"depth raster shape {self.values.shape} != (height={self.height}, width={self.width})"
            )

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.values) & (self.values > 0.0)


@dataclass
class InstanceMask:
    """Binary segmentation mask stored as row-major run-length counts.

    Runs alternate starting with the number of zeros, so a mask that
    begins with a foreground pixel starts with a 0 run. Runs after the
    first are positive and the counts sum to width * height.
    """

    width: int
    height: int
    rle: tuple[int, ...]
    label: str
    instance_id: int

    def __post_init__(self):
        self.rle = tuple(int(r) for r in self.rle)
        if not self.rle:
            raise InputShapeError("rle must contain at least one run")
        if self.rle[0] < 0 or any(r < 1 for r in self.rle[1:]):
            raise InputShapeError(f"rle runs must be positive after the first: {self.rle}")
        if sum(self.rle) != self.width * self.height:
            raise InputShapeError(
                f"rle runs sum to {sum(self.rle)}, expected {self.width * self.height}"
            )
        if self.instance_id < 0:
            raise ValueError(f"instance_id must be non-negative: {self.instance_id}")

    def decode(self) -> np.ndarray:
        """Expand to a (height, width) uint8 array of 0/1."""
        flat = np.zeros(self.width * self.height, dtype=np.uint8)
        pos = 0
        value = 0
        for run in self.rle:
            if value:
                flat[pos : pos + run] = 1
            pos += run
            value ^= 1
        return flat.reshape(self.height, self.width)

    @classmethod
    def encode(cls, array: np.ndarray, label: str, instance_id: int) -> "InstanceMask":
        """Build a mask from a (height, width) array of 0/1."""
        arr = np.asarray(array)
        if arr.ndim != 2:
            raise InputShapeError(f"mask array must be 2-d, got shape {arr.shape}")
        flat = (arr.reshape(-1) != 0).astype(np.int8)
        runs: list[int] = []
        value = 0
        count = 0
        for v in flat:
            if v == value:
                count += 1
            else:
                runs.append(count)
                value = v
                count = 1
        runs.append(count)
        if not runs:
            runs = [0]
        return cls(
            width=arr.shape[1],
            height=arr.shape[0],
            rle=tuple(runs),
            label=label,
            instance_id=instance_id,
        )

    def pixel_count(self) -> int:
        return sum(self.rle[1::2])


@dataclass
class PointCloud:
    """Points of shape (n, 3), float64, tagged with their frame."""

    points: np.ndarray
    frame: Frame

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.isfinite(self.points).all():
            raise ValueError("point cloud contains non-finite coordinates")

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class DenoiseConfig:
    nb_neighbors: int = 10
    std_ratio: float = 1.2
    voxel_floor: float = 0.01
    voxel_divisor: float = 40.0
    dbscan_eps: float = 0.2
    dbscan_min_points: int = 10
    min_surviving_points: int = 10

    def __post_init__(self):
        for name in (
            "nb_neighbors",
            "std_ratio",
            "voxel_floor",
            "voxel_divisor",
            "dbscan_eps",
            "dbscan_min_points",
            "min_surviving_points",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box, corners as (x, y, z) tuples."""

    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]

    def __post_init__(self):
        if any(lo > hi for lo, hi in zip(self.min_corner, self.max_corner)):
            raise ValueError(f"aabb min exceeds max: {self.min_corner} > {self.max_corner}")

    def extents(self) -> tuple[float, float, float]:
        return tuple(hi - lo for lo, hi in zip(self.min_corner, self.max_corner))

    def volume(self) -> float:
        ex, ey, ez = self.extents()
        return ex * ey * ez


def backproject(
    depth: DepthRaster, intrinsics: CameraIntrinsics, mask: InstanceMask | None = None
) -> PointCloud:
    """Lift valid depth pixels into the camera frame.

    Pixel (u, v) with depth d maps to ((u - cx) * d / fx, (v - cy) * d / fy, d).
    Pixels are visited row-major; invalid depths are skipped silently. When a
    mask is given only its foreground pixels contribute.
    """
    valid = depth.valid_mask()
    if mask is not None:
        if (mask.width, mask.height) != (depth.width, depth.height):
            raise InputShapeError(
                f"mask {mask.width}x{mask.height} does not match depth {depth.width}x{depth.height}"
            )
        valid &= mask.decode().astype(bool)
    vs, us = np.nonzero(valid)  # row-major order
    d = depth.values[vs, us]
    x = (us - intrinsics.cx) * d / intrinsics.fx
    y = (vs - intrinsics.cy) * d / intrinsics.fy
    return PointCloud(np.stack([x, y, d], axis=1) if len(d) else np.zeros((0, 3)), Frame.CAMERA)


# Fixed axis permutation taking the camera frame (x right, y down, z forward)
# into the canonical frame (x right, y forward, z up) for a level camera.
_CAM_TO_CANON = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, -1.0, 0.0],
    ]
)


def rotation_from_gravity(gravity: GravityPose) -> np.ndarray:
    """Rotation mapping camera-frame points into the canonical frame.

    Composed as the axis permutation for a level camera times the inverse
    of the camera's pitch/roll attitude, so for any pose the scene's up
    direction lands on +z. Identity pose reduces to the permutation alone;
    yaw is deliberately absent so left/right stay viewer-relative.
    """
    p, r = gravity.pitch, gravity.roll
    rx = np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, math.cos(p), -math.sin(p)],
            [0.0, math.sin(p), math.cos(p)],
        ]
    )
    rz = np.array(
        [
            [math.cos(r), -math.sin(r), 0.0],
            [math.sin(r), math.cos(r), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    return _CAM_TO_CANON @ rx @ rz


def canonicalize(cloud: PointCloud, rotation: np.ndarray) -> PointCloud:
    """Rotate a camera-frame cloud into the canonical frame, order preserved."""
    if cloud.frame is not Frame.CAMERA:
        raise FrameError(f"canonicalize expects a camera-frame cloud, got {cloud.frame}")
    return PointCloud(cloud.points @ rotation.T, Frame.CANONICAL)


def remove_statistical_outliers(
    cloud: PointCloud, nb_neighbors: int, std_ratio: float
) -> PointCloud:
    """Drop points whose mean distance to their nb_neighbors nearest
    neighbors exceeds the global mean by more than std_ratio stddevs.

    The query point is excluded from its own neighbor set. Clouds with
    <= nb_neighbors points are returned unchanged; order is preserved.
    """
    n = len(cloud)
    if n <= nb_neighbors:
        return cloud
    tree = cKDTree(cloud.points)
    dists, _ = tree.query(cloud.points, k=nb_neighbors + 1)
    means = dists[:, 1:].mean(axis=1)
    threshold = means.mean() + std_ratio * means.std()
    return PointCloud(cloud.points[means <= threshold], cloud.frame)


def voxel_downsample(cloud: PointCloud, voxel_size: float) -> PointCloud:
    """Replace each occupied voxel by the centroid of its points.

    Voxel keys are floor(coordinate / voxel_size) per axis; output points
    are ordered by the first appearance of their voxel in the input.
    """
    if voxel_size <= 0.0:
        raise ValueError(f"voxel_size must be positive: {voxel_size}")
    if len(cloud) == 0:
        return cloud
    keys = np.floor(cloud.points / voxel_size).astype(np.int64)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    groups = inverse.max() + 1
    first_seen = np.full(groups, len(cloud), dtype=np.int64)
    np.minimum.at(first_seen, inverse, np.arange(len(cloud)))
    sums = np.zeros((groups, 3))
    np.add.at(sums, inverse, cloud.points)
    counts = np.bincount(inverse, minlength=groups)
    centroids = sums / counts[:, None]
    order = np.argsort(first_seen, kind="stable")
    return PointCloud(centroids[order], cloud.frame)


def dbscan(cloud: PointCloud, eps: float, min_points: int) -> np.ndarray:
    """Density-based clustering; returns one label per point, NOISE = -1.

    A point is core iff it has >= min_points neighbors within eps, the
    point itself included. Clusters are numbered in discovery order while
    scanning points by index, and a border point reachable from several
    clusters keeps the first cluster that claimed it.
    """
    n = len(cloud)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels

    # CSR adjacency straight from the pair list; no per-point Python lists.
    # The point itself is counted via deg + 1 rather than stored. Stable
    # integer argsort groups by row in linear time; within-row order is
    # free to vary because each BFS run labels an order-independent set.
    pairs = cKDTree(cloud.points).query_pairs(eps, output_type="ndarray")
    deg = np.bincount(pairs[:, 0], minlength=n) + np.bincount(pairs[:, 1], minlength=n)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    order = np.argsort(rows, kind="stable")
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])[order]
    indptr = np.concatenate([[0], np.cumsum(deg)])

    visited = np.zeros(n, dtype=bool)
    enqueued = np.zeros(n, dtype=bool)

    def expand(i: int, seeds: deque) -> None:
        # Skipping the point itself is safe: it is already labeled and
        # visited whenever its own neighborhood is expanded.
        arr = cols[indptr[i] : indptr[i + 1]]
        fresh = arr[~enqueued[arr]]
        enqueued[fresh] = True
        seeds.extend(fresh.tolist())

    cluster = 0
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        if deg[i] + 1 < min_points:
            continue  # noise for now; a later cluster may claim it as border
        labels[i] = cluster
        seeds: deque = deque()
        expand(i, seeds)
        while seeds:
            j = seeds.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster
            if visited[j]:
                continue
            visited[j] = True
            if deg[j] + 1 >= min_points:
                expand(j, seeds)
        cluster += 1
    return labels


def denoise_pipeline(cloud: PointCloud, config: DenoiseConfig = DenoiseConfig()) -> PointCloud | None:
    """Outlier removal, voxel thinning, then keep the largest dbscan cluster.

    Runs on canonical-frame clouds only. Returns None when fewer than
    config.min_surviving_points survive, which marks the object rejected.
    """
    if cloud.frame is not Frame.CANONICAL:
        raise FrameError(f"denoise_pipeline expects a canonical-frame cloud, got {cloud.frame}")
    if len(cloud) == 0:
        return None
    norms = np.linalg.norm(cloud.points, axis=1)
    scale = float(norms.std()) * 3.0 + 1e-6
    cloud = remove_statistical_outliers(cloud, config.nb_neighbors, config.std_ratio)
    cloud = voxel_downsample(cloud, max(config.voxel_floor, scale / config.voxel_divisor))
    labels = dbscan(cloud, config.dbscan_eps, config.dbscan_min_points)
    clustered = labels[labels != NOISE]
    if clustered.size == 0:
        return None
    counts = np.bincount(clustered)
    keep = int(np.argmax(counts))  # argmax takes the first maximum: lowest id wins ties
    survivors = cloud.points[labels == keep]
    if survivors.shape[0] < config.min_surviving_points:
        return None
    return PointCloud(survivors, Frame.CANONICAL)


def fit_aabb(cloud: PointCloud) -> Aabb:
    """Componentwise min/max box around a non-empty canonical cloud."""
    if cloud.frame is not Frame.CANONICAL:
        raise FrameError(f"fit_aabb expects a canonical-frame cloud, got {cloud.frame}")
    if len(cloud) == 0:
        raise EmptyCloudError("cannot fit a box around an empty cloud")
    lo = cloud.points.min(axis=0)
    hi = cloud.points.max(axis=0)
    return Aabb(tuple(float(v) for v in lo), tuple(float(v) for v in hi))
