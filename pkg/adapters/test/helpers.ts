import { deflateSync, crc32 } from "node:zlib";

import type {
  BinaryMask,
  Detection,
  Gravity,
  Intrinsics,
  ModelProviders,
} from "../src/providers.js";

/** Deterministic PRNG so mask fuzzing is reproducible across runs. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function pngChunk(type: string, data: Buffer): Buffer {
  const length = Buffer.alloc(4);
  length.writeUInt32BE(data.length, 0);
  const typeBuf = Buffer.from(type, "latin1");
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(Buffer.concat([typeBuf, data])) >>> 0, 0);
  return Buffer.concat([length, typeBuf, data, crc]);
}

/** A valid grayscale PNG filled with zeros; only the size matters. */
export function makePng(width: number, height: number): Buffer {
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 0; // grayscale
  const scanlines = Buffer.alloc(height * (width + 1)); // filter byte + pixels
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    pngChunk("IHDR", ihdr),
    pngChunk("IDAT", deflateSync(scanlines)),
    pngChunk("IEND", Buffer.alloc(0)),
  ]);
}

/** Just enough JPEG for the header sniffer: SOI, APP0, SOF0. */
export function makeJpegHeader(width: number, height: number): Buffer {
  const app0 = Buffer.from([0xff, 0xe0, 0x00, 0x10, 0x4a, 0x46, 0x49, 0x46, 0x00, 0x01, 0x01, 0x00, 0x00, 0x01, 0x00, 0x01, 0x00, 0x00]);
  const sof0 = Buffer.alloc(13);
  sof0[0] = 0xff;
  sof0[1] = 0xc0;
  sof0.writeUInt16BE(11, 2);
  sof0[4] = 8; // precision
  sof0.writeUInt16BE(height, 5);
  sof0.writeUInt16BE(width, 7);
  sof0[9] = 1; // one component
  return Buffer.concat([Buffer.from([0xff, 0xd8]), app0, sof0]);
}

export interface FakeScene {
  intrinsics: Intrinsics;
  gravity: Gravity;
  depthWidth: number;
  depthHeight: number;
  depthValue: number;
  tags: string[];
  detections: Detection[];
  masks: BinaryMask[];
}

/** In-process providers serving canned per-image replies keyed by path. */
export function fakeProviders(scenes: Map<string, FakeScene>): ModelProviders {
  const scene = (imagePath: string): FakeScene => {
    const s = scenes.get(imagePath);
    if (!s) throw new Error(`no fake scene for ${imagePath}`);
    return s;
  };
  return {
    async intrinsics(imagePath) {
      return scene(imagePath).intrinsics;
    },
    async gravity(imagePath) {
      return scene(imagePath).gravity;
    },
    async depth(imagePath) {
      const s = scene(imagePath);
      return {
        width: s.depthWidth,
        height: s.depthHeight,
        values: new Float32Array(s.depthWidth * s.depthHeight).fill(s.depthValue),
      };
    },
    async tags(imagePath) {
      return scene(imagePath).tags;
    },
    async detect(imagePath) {
      return scene(imagePath).detections;
    },
    async segment(imagePath) {
      return scene(imagePath).masks;
    },
  };
}

/** A centered rectangle of foreground pixels. */
export function blockMask(width: number, height: number): BinaryMask {
  const data = new Uint8Array(width * height);
  for (let y = Math.floor(height / 4); y < Math.ceil((3 * height) / 4); y++) {
    for (let x = Math.floor(width / 4); x < Math.ceil((3 * width) / 4); x++) {
      data[y * width + x] = 1;
    }
  }
  return { width, height, data };
}
