"""On-disk bundle format: one directory per image.

    <bundle>/manifest.json   image id, size, intrinsics, gravity, instances
    <bundle>/depth.raw       little-endian float32, row-major, height x width, meters

Instance masks live in the manifest as run-length counts (alternating runs,
zeros first). Writers are atomic: files are staged next to their target and
renamed into place.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import BundleFormatError
from .geometry import CameraIntrinsics, DepthRaster, GravityPose, InstanceMask
from .scenegraph import SceneBundle

MANIFEST_NAME = "manifest.json"
DEPTH_NAME = "depth.raw"


def atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + f".tmp-{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_bundle(bundle: SceneBundle, directory: Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "image_id": bundle.image_id,
        "width": bundle.width,
        "height": bundle.height,
        "intrinsics": {
            "fx": bundle.intrinsics.fx,
            "fy": bundle.intrinsics.fy,
            "cx": bundle.intrinsics.cx,
            "cy": bundle.intrinsics.cy,
        },
        "gravity": {"pitch": bundle.gravity.pitch, "roll": bundle.gravity.roll},
        "instances": [
            {"instance_id": m.instance_id, "label": m.label, "rle": list(m.rle)}
            for m in bundle.instances
        ],
    }
    atomic_write_text(directory / MANIFEST_NAME, json.dumps(manifest, indent=2) + "\n")
    depth32 = bundle.depth.values.astype("<f4")
    atomic_write_bytes(directory / DEPTH_NAME, depth32.tobytes(order="C"))


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise BundleFormatError(message)


def read_bundle(directory: Path) -> SceneBundle:
    """Load and structurally validate one bundle directory."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    depth_path = directory / DEPTH_NAME
    _require(manifest_path.is_file(), f"{directory}: missing {MANIFEST_NAME}")
    _require(depth_path.is_file(), f"{directory}: missing {DEPTH_NAME}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BundleFormatError(f"{manifest_path}: not valid JSON ({exc})") from exc

    for key in ("image_id", "width", "height", "intrinsics", "gravity", "instances"):
        _require(key in manifest, f"{manifest_path}: missing key {key!r}")
    width, height = manifest["width"], manifest["height"]
    _require(
        isinstance(width, int) and isinstance(height, int) and width > 0 and height > 0,
        f"{manifest_path}: width/height must be positive integers",
    )

    raw = depth_path.read_bytes()
    expected = width * height * 4
    _require(
        len(raw) == expected,
        f"{depth_path}: {len(raw)} bytes, expected {expected} for {width}x{height} float32",
    )
    values = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(height, width)

    try:
        intr = manifest["intrinsics"]
        intrinsics = CameraIntrinsics(
            fx=float(intr["fx"]), fy=float(intr["fy"]), cx=float(intr["cx"]), cy=float(intr["cy"])
        )
        grav = manifest["gravity"]
        gravity = GravityPose(pitch=float(grav["pitch"]), roll=float(grav["roll"]))
        instances = [
            InstanceMask(
                width=width,
                height=height,
                rle=tuple(entry["rle"]),
                label=str(entry["label"]),
                instance_id=int(entry["instance_id"]),
            )
            for entry in manifest["instances"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleFormatError(f"{manifest_path}: {exc}") from exc
    except Exception as exc:  # InputShapeError from mask construction
        raise BundleFormatError(f"{manifest_path}: {exc}") from exc

    bundle = SceneBundle(
        image_id=str(manifest["image_id"]),
        width=width,
        height=height,
        intrinsics=intrinsics,
        gravity=gravity,
        depth=DepthRaster(width=width, height=height, values=values),
        instances=instances,
    )
    try:
        bundle.validate()
    except Exception as exc:
        raise BundleFormatError(f"{directory}: {exc}") from exc
    return bundle


def is_bundle_dir(directory: Path) -> bool:
    return (Path(directory) / MANIFEST_NAME).is_file()


def discover_bundles(root: Path) -> list[Path]:
    """Bundle directories under root, sorted by name; root itself counts."""
    root = Path(root)
    if is_bundle_dir(root):
        return [root]
    return sorted(p for p in root.iterdir() if p.is_dir() and is_bundle_dir(p))
