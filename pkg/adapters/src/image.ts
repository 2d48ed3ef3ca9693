/**
 * Image header sniffing. The adapter never decodes pixels (the models it
 * drives take the file path); it only needs the raster size and a cheap
 * check that the file is actually an image.
 */

import { openSync, readSync, closeSync } from "node:fs";

export interface ImageSize {
  width: number;
  height: number;
}

export class NotAnImageError extends Error {}

const PNG_SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

function readHead(path: string, bytes: number): Buffer {
  const buf = Buffer.alloc(bytes);
  const fd = openSync(path, "r");
  try {
    const n = readSync(fd, buf, 0, bytes, 0);
    return buf.subarray(0, n);
  } finally {
    closeSync(fd);
  }
}

function pngSize(head: Buffer): ImageSize | null {
  if (head.length < 24 || !head.subarray(0, 8).equals(PNG_SIGNATURE)) return null;
  if (head.toString("latin1", 12, 16) !== "IHDR") return null;
  return { width: head.readUInt32BE(16), height: head.readUInt32BE(20) };
}

// Walk JPEG segments until a start-of-frame marker carries the dimensions.
function jpegSize(path: string): ImageSize | null {
  const head = readHead(path, 65536);
  if (head.length < 4 || head[0] !== 0xff || head[1] !== 0xd8) return null;
  let pos = 2;
  while (pos + 9 < head.length) {
    if (head[pos] !== 0xff) return null;
    const marker = head[pos + 1];
    if (marker === 0xd8 || (marker >= 0xd0 && marker <= 0xd9)) {
      pos += 2;
      continue;
    }
    const length = head.readUInt16BE(pos + 2);
    const isSof =
      marker >= 0xc0 && marker <= 0xcf && marker !== 0xc4 && marker !== 0xc8 && marker !== 0xcc;
    if (isSof) {
      return { height: head.readUInt16BE(pos + 5), width: head.readUInt16BE(pos + 7) };
    }
    pos += 2 + length;
  }
  return null;
}

/** Size of a PNG or JPEG file; anything else raises NotAnImageError. */
export function imageSize(path: string): ImageSize {
  const fromPng = pngSize(readHead(path, 24));
  if (fromPng) {
    if (fromPng.width < 1 || fromPng.height < 1) {
      throw new NotAnImageError(`${path}: degenerate PNG size`);
    }
    return fromPng;
  }
  const fromJpeg = jpegSize(path);
  if (fromJpeg) {
    if (fromJpeg.width < 1 || fromJpeg.height < 1) {
      throw new NotAnImageError(`${path}: degenerate JPEG size`);
    }
    return fromJpeg;
  }
  throw new NotAnImageError(`${path}: not a PNG or JPEG`);
}

export function looksLikeImagePath(name: string): boolean {
  return /\.(png|jpe?g)$/i.test(name);
}
