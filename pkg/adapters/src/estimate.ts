/**
 * Single-image estimation chain: intrinsics and gravity first, then
 * metric depth (it needs the intrinsics), then tagging, detection, and
 * segmentation to produce per-instance masks. The stages run
 * sequentially inside one image job; parallelism lives across images.
 */

import { basename, extname, join } from "node:path";

import { writeBundleDir, resizeDepthNearest } from "./bundle.js";
import type { BundleInstance, SceneBundleData } from "./bundle.js";
import { imageSize } from "./image.js";
import { encodeMask } from "./rle.js";
import { StageClientError } from "./providers.js";
import type { BinaryMask, Detection, ModelProviders } from "./providers.js";

export class AdapterError extends Error {}

function checkPhysical(bundle: SceneBundleData): void {
  const { intrinsics, gravity, width, height } = bundle;
  if (intrinsics.fx <= 0 || intrinsics.fy <= 0) {
    throw new StageClientError(`non-positive focal length fx=${intrinsics.fx} fy=${intrinsics.fy}`);
  }
  if (intrinsics.cx < 0 || intrinsics.cx >= width || intrinsics.cy < 0 || intrinsics.cy >= height) {
    throw new StageClientError(`principal point (${intrinsics.cx}, ${intrinsics.cy}) outside image`);
  }
  if (Math.abs(gravity.pitch) > Math.PI / 2 || gravity.roll <= -Math.PI || gravity.roll > Math.PI) {
    throw new StageClientError(`gravity out of range: pitch=${gravity.pitch} roll=${gravity.roll}`);
  }
}

/** Convert model masks into RLE instances, ids numbered by detection order. */
export function exportMasks(
  detections: Detection[],
  masks: BinaryMask[],
  width: number,
  height: number,
): BundleInstance[] {
  if (masks.length !== detections.length) {
    throw new StageClientError(`${masks.length} masks for ${detections.length} detections`);
  }
  return masks.map((mask, i) => {
    if (mask.width !== width || mask.height !== height) {
      throw new StageClientError(
        `mask ${i} is ${mask.width}x${mask.height}, image is ${width}x${height}`,
      );
    }
    return {
      instanceId: i,
      label: detections[i].label,
      rle: encodeMask(mask.data, width, height),
    };
  });
}

export async function estimateBundle(
  imagePath: string,
  providers: ModelProviders,
): Promise<SceneBundleData> {
  let size;
  try {
    size = imageSize(imagePath);
  } catch (err) {
    throw new AdapterError((err as Error).message);
  }

  const intrinsics = await providers.intrinsics(imagePath);
  const gravity = await providers.gravity(imagePath);
  const depth = await providers.depth(imagePath, intrinsics);

  const tags = await providers.tags(imagePath);
  let instances: BundleInstance[] = [];
  if (tags.length > 0) {
    const detections = await providers.detect(imagePath, tags);
    if (detections.length > 0) {
      const masks = await providers.segment(imagePath, detections);
      instances = exportMasks(detections, masks, size.width, size.height);
    }
  }

  const bundle: SceneBundleData = {
    imageId: basename(imagePath, extname(imagePath)),
    width: size.width,
    height: size.height,
    intrinsics,
    gravity,
    depth: resizeDepthNearest(depth, size.width, size.height),
    instances,
  };
  checkPhysical(bundle);
  return bundle;
}

/** Estimate one image and write its bundle directory under outRoot. */
export async function estimateToDir(
  imagePath: string,
  providers: ModelProviders,
  outRoot: string,
): Promise<string> {
  const bundle = await estimateBundle(imagePath, providers);
  const directory = join(outRoot, bundle.imageId);
  writeBundleDir(bundle, directory);
  return directory;
}
