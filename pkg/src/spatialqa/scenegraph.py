"""Scene graphs: object nodes with metric attributes plus pairwise relations.

Horizontal (left/right) and depth (behind/front) orderings are judged in the
camera frame so they stay viewer-relative; vertical ordering and all metric
relations are judged in the canonical frame where +z is up.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDirectionError, InputShapeError
from .geometry import (
    Aabb,
    CameraIntrinsics,
    DenoiseConfig,
    DepthRaster,
    Frame,
    GravityPose,
    InstanceMask,
    backproject,
    canonicalize,
    denoise_pipeline,
    fit_aabb,
    rotation_from_gravity,
)

log = logging.getLogger(__name__)

GRAPH_FORMAT = "scene-graph/v1"


class RelationKind(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    ABOVE = "above"
    BELOW = "below"
    BEHIND = "behind"
    FRONT = "front"
    WIDE = "wide"
    THIN = "thin"
    TALL = "tall"
    SHORT = "short"
    BIG = "big"
    SMALL = "small"
    DIRECTION = "direction"
    DIRECT_DISTANCE = "direct_distance"
    HORIZONTAL_DISTANCE = "horizontal_distance"
    VERTICAL_DISTANCE = "vertical_distance"


METRIC_KINDS = (
    RelationKind.DIRECTION,
    RelationKind.DIRECT_DISTANCE,
    RelationKind.HORIZONTAL_DISTANCE,
    RelationKind.VERTICAL_DISTANCE,
)


@dataclass
class SceneBundle:
    """Everything known about one image: depth, pose, and instance masks."""

    image_id: str
    width: int
    height: int
    intrinsics: CameraIntrinsics
    gravity: GravityPose
    depth: DepthRaster
    instances: list[InstanceMask]

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise InputShapeError(f"bundle size {self.width}x{self.height} must be positive")
        if (self.depth.width, self.depth.height) != (self.width, self.height):
            raise InputShapeError(
                f"depth raster {self.depth.width}x{self.depth.height} "
                f"does not match bundle {self.width}x{self.height}"
            )
        if not self.intrinsics.cx < self.width or not self.intrinsics.cy < self.height:
            raise InputShapeError("principal point lies outside the image")
        seen: set[int] = set()
        for mask in self.instances:
            if (mask.width, mask.height) != (self.width, self.height):
                raise InputShapeError(
                    f"instance {mask.instance_id} mask {mask.width}x{mask.height} "
                    f"does not match bundle {self.width}x{self.height}"
                )
            if mask.instance_id in seen:
                raise InputShapeError(f"duplicate instance_id {mask.instance_id}")
            seen.add(mask.instance_id)


@dataclass
class ObjectNode:
    instance_id: int
    label: str
    centroid: np.ndarray  # canonical frame
    centroid_camera: np.ndarray
    aabb: Aabb
    width: float
    height: float
    point_count: int


@dataclass
class RelationEdge:
    subject_id: int
    object_id: int
    kind: RelationKind
    value: float | None = None


@dataclass
class SceneGraph:
    image_id: str
    nodes: list[ObjectNode] = field(default_factory=list)
    edges: list[RelationEdge] = field(default_factory=list)


def node_dimensions(box: Aabb) -> tuple[float, float]:
    """(width, height) of a canonical box: widest horizontal extent, z extent."""
    ex, ey, ez = box.extents()
    return max(ex, ey), ez


def relative_horizontal(a: ObjectNode, b: ObjectNode) -> RelationKind:
    """LEFT iff a's camera-frame centroid x is strictly less than b's."""
    return RelationKind.LEFT if a.centroid_camera[0] < b.centroid_camera[0] else RelationKind.RIGHT


def relative_vertical(a: ObjectNode, b: ObjectNode) -> RelationKind:
    """ABOVE iff a's canonical centroid z is strictly greater than b's."""
    return RelationKind.ABOVE if a.centroid[2] > b.centroid[2] else RelationKind.BELOW


def relative_depth_order(a: ObjectNode, b: ObjectNode) -> RelationKind:
    """BEHIND iff a's camera-frame centroid z is strictly greater than b's."""
    return RelationKind.BEHIND if a.centroid_camera[2] > b.centroid_camera[2] else RelationKind.FRONT


def relative_width(a: ObjectNode, b: ObjectNode) -> RelationKind:
    return RelationKind.WIDE if a.width > b.width else RelationKind.THIN


def relative_height(a: ObjectNode, b: ObjectNode) -> RelationKind:
    return RelationKind.TALL if a.height > b.height else RelationKind.SHORT


def relative_volume(a: ObjectNode, b: ObjectNode) -> RelationKind:
    return RelationKind.BIG if a.aabb.volume() > b.aabb.volume() else RelationKind.SMALL


def direct_distance(a: ObjectNode, b: ObjectNode) -> float:
    return float(np.linalg.norm(a.centroid - b.centroid))


def horizontal_distance(a: ObjectNode, b: ObjectNode) -> float:
    return float(np.linalg.norm(a.centroid[:2] - b.centroid[:2]))


def vertical_distance(a: ObjectNode, b: ObjectNode) -> float:
    return float(abs(a.centroid[2] - b.centroid[2]))


def clock_direction(a: ObjectNode, b: ObjectNode) -> int:
    """Clock hour of b as seen from a, looking down the canonical z axis.

    12 o'clock is straight ahead (+y), 3 o'clock to the right (+x). The
    angle is rounded half-up to the nearest hour; a zero horizontal offset
    has no direction and raises DegenerateDirectionError.
    """
    dx = b.centroid[0] - a.centroid[0]
    dy = b.centroid[1] - a.centroid[1]
    if dx == 0.0 and dy == 0.0:
        raise DegenerateDirectionError(
            f"nodes {a.instance_id} and {b.instance_id} share a horizontal position"
        )
    theta = math.degrees(math.atan2(dx, dy)) % 360.0
    hour = math.floor(theta / 30.0 + 0.5)
    return 12 if hour == 0 else hour


def _node_from_instance(
    mask: InstanceMask,
    depth: DepthRaster,
    intrinsics: CameraIntrinsics,
    rotation: np.ndarray,
    config: DenoiseConfig,
) -> ObjectNode | None:
    camera_cloud = backproject(depth, intrinsics, mask)
    cloud = canonicalize(camera_cloud, rotation)
    kept = denoise_pipeline(cloud, config)
    if kept is None:
        return None
    centroid = kept.points.mean(axis=0)
    box = fit_aabb(kept)
    width, height = node_dimensions(box)
    return ObjectNode(
        instance_id=mask.instance_id,
        label=mask.label,
        centroid=centroid,
        centroid_camera=rotation.T @ centroid,
        aabb=box,
        width=width,
        height=height,
        point_count=len(kept),
    )


def derive_edges(nodes: list[ObjectNode]) -> list[RelationEdge]:
    """All ordered-pair relations, in a fixed deterministic order."""
    edges: list[RelationEdge] = []
    for a in nodes:
        for b in nodes:
            if a.instance_id == b.instance_id:
                continue
            for kind in (
                relative_horizontal(a, b),
                relative_vertical(a, b),
                relative_depth_order(a, b),
                relative_width(a, b),
                relative_height(a, b),
                relative_volume(a, b),
            ):
                edges.append(RelationEdge(a.instance_id, b.instance_id, kind))
            try:
                hour = clock_direction(a, b)
                edges.append(
                    RelationEdge(a.instance_id, b.instance_id, RelationKind.DIRECTION, float(hour))
                )
            except DegenerateDirectionError:
                pass
            edges.append(
                RelationEdge(
                    a.instance_id, b.instance_id, RelationKind.DIRECT_DISTANCE, direct_distance(a, b)
                )
            )
            edges.append(
                RelationEdge(
                    a.instance_id,
                    b.instance_id,
                    RelationKind.HORIZONTAL_DISTANCE,
                    horizontal_distance(a, b),
                )
            )
            edges.append(
                RelationEdge(
                    a.instance_id,
                    b.instance_id,
                    RelationKind.VERTICAL_DISTANCE,
                    vertical_distance(a, b),
                )
            )
    return edges


def build_scene_graph(bundle: SceneBundle, config: DenoiseConfig = DenoiseConfig()) -> SceneGraph:
    """Lift every instance to 3D, drop the ones denoising rejects, relate the rest.

    Nodes are ordered by ascending instance_id. Instances whose clouds come
    back empty or below the survival threshold are skipped with a log line.
    """
    bundle.validate()
    rotation = rotation_from_gravity(bundle.gravity)
    nodes: list[ObjectNode] = []
    for mask in sorted(bundle.instances, key=lambda m: m.instance_id):
        node = _node_from_instance(mask, bundle.depth, bundle.intrinsics, rotation, config)
        if node is None:
            log.info(
                "bundle %s: instance %d (%s) rejected by denoising",
                bundle.image_id,
                mask.instance_id,
                mask.label,
            )
            continue
        nodes.append(node)
    return SceneGraph(image_id=bundle.image_id, nodes=nodes, edges=derive_edges(nodes))


def _f6(x: float) -> str:
    if x == 0.0:
        x = 0.0  # normalize -0.0
    return f"{x:.6f}"


def _vec6(v) -> str:
    return "[" + ", ".join(_f6(float(c)) for c in v) + "]"


def graph_to_text(graph: SceneGraph) -> str:
    """Serialize to the scene-graph file format: JSON with %.6f numbers.

    The writer is hand-rolled so reruns produce byte-identical files.
    """
    lines = ["{"]
    lines.append(f'  "format": "{GRAPH_FORMAT}",')
    lines.append(f'  "image_id": {json.dumps(graph.image_id)},')
    lines.append('  "nodes": [')
    for i, n in enumerate(graph.nodes):
        comma = "," if i < len(graph.nodes) - 1 else ""
        lines.append(
            "    {"
            + f'"instance_id": {n.instance_id}, '
            + f'"label": {json.dumps(n.label)}, '
            + f'"centroid": {_vec6(n.centroid)}, '
            + f'"centroid_camera": {_vec6(n.centroid_camera)}, '
            + f'"aabb_min": {_vec6(n.aabb.min_corner)}, '
            + f'"aabb_max": {_vec6(n.aabb.max_corner)}, '
            + f'"width": {_f6(n.width)}, '
            + f'"height": {_f6(n.height)}, '
            + f'"point_count": {n.point_count}'
            + "}"
            + comma
        )
    lines.append("  ],")
    lines.append('  "edges": [')
    for i, e in enumerate(graph.edges):
        comma = "," if i < len(graph.edges) - 1 else ""
        value = "" if e.value is None else f', "value": {_f6(e.value)}'
        lines.append(
            "    {"
            + f'"subject": {e.subject_id}, "object": {e.object_id}, "kind": "{e.kind.value}"'
            + value
            + "}"
            + comma
        )
    lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_from_text(text: str) -> SceneGraph:
    """Parse a scene-graph file written by graph_to_text."""
    doc = json.loads(text)
    if doc.get("format") != GRAPH_FORMAT:
        raise InputShapeError(f"unknown graph format: {doc.get('format')!r}")
    nodes = [
        ObjectNode(
            instance_id=int(n["instance_id"]),
            label=n["label"],
            centroid=np.array(n["centroid"], dtype=np.float64),
            centroid_camera=np.array(n["centroid_camera"], dtype=np.float64),
            aabb=Aabb(tuple(n["aabb_min"]), tuple(n["aabb_max"])),
            width=float(n["width"]),
            height=float(n["height"]),
            point_count=int(n["point_count"]),
        )
        for n in doc["nodes"]
    ]
    edges = [
        RelationEdge(
            subject_id=int(e["subject"]),
            object_id=int(e["object"]),
            kind=RelationKind(e["kind"]),
            value=float(e["value"]) if "value" in e else None,
        )
        for e in doc["edges"]
    ]
    return SceneGraph(image_id=doc["image_id"], nodes=nodes, edges=edges)
