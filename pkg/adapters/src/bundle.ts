/**
 * Scene bundle writer. A bundle is a directory holding manifest.json
 * (image id, size, intrinsics, gravity, instance RLE masks) next to
 * depth.raw, little-endian float32, row-major, height*width values in
 * meters. The downstream validator is the contract: every bundle written
 * here must pass it unchanged.
 */

import { mkdirSync, renameSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import type { DepthMap, Gravity, Intrinsics } from "./providers.js";

export interface BundleInstance {
  instanceId: number;
  label: string;
  rle: number[];
}

export interface SceneBundleData {
  imageId: string;
  width: number;
  height: number;
  intrinsics: Intrinsics;
  gravity: Gravity;
  depth: Float32Array; // already at width x height
  instances: BundleInstance[];
}

/**
 * Nearest-neighbor resample to the image resolution. Depth is metric, so
 * interpolation would invent distances that exist nowhere in the scene;
 * nearest keeps every output value one the model actually produced.
 */
export function resizeDepthNearest(depth: DepthMap, width: number, height: number): Float32Array {
  if (depth.width === width && depth.height === height) {
    return depth.values;
  }
  const out = new Float32Array(width * height);
  for (let y = 0; y < height; y++) {
    let sy = Math.floor(((y + 0.5) * depth.height) / height);
    if (sy >= depth.height) sy = depth.height - 1;
    for (let x = 0; x < width; x++) {
      let sx = Math.floor(((x + 0.5) * depth.width) / width);
      if (sx >= depth.width) sx = depth.width - 1;
      out[y * width + x] = depth.values[sy * depth.width + sx];
    }
  }
  return out;
}

export function depthBytes(depth: Float32Array): Buffer {
  const buf = Buffer.alloc(depth.length * 4);
  for (let i = 0; i < depth.length; i++) {
    buf.writeFloatLE(depth[i], i * 4);
  }
  return buf;
}

export function manifestJson(bundle: SceneBundleData): string {
  const manifest = {
    image_id: bundle.imageId,
    width: bundle.width,
    height: bundle.height,
    intrinsics: {
      fx: bundle.intrinsics.fx,
      fy: bundle.intrinsics.fy,
      cx: bundle.intrinsics.cx,
      cy: bundle.intrinsics.cy,
    },
    gravity: { pitch: bundle.gravity.pitch, roll: bundle.gravity.roll },
    instances: bundle.instances.map((inst) => ({
      instance_id: inst.instanceId,
      label: inst.label,
      rle: inst.rle,
    })),
  };
  return JSON.stringify(manifest, null, 2) + "\n";
}

function writeAtomic(path: string, data: Buffer | string): void {
  const tmp = `${path}.tmp-${process.pid}`;
  writeFileSync(tmp, data);
  renameSync(tmp, path);
}

export function writeBundleDir(bundle: SceneBundleData, directory: string): void {
  if (bundle.depth.length !== bundle.width * bundle.height) {
    throw new Error(
      `depth has ${bundle.depth.length} values, expected ${bundle.width}x${bundle.height}`,
    );
  }
  mkdirSync(directory, { recursive: true });
  writeAtomic(join(directory, "manifest.json"), manifestJson(bundle));
  writeAtomic(join(directory, "depth.raw"), depthBytes(bundle.depth));
}
