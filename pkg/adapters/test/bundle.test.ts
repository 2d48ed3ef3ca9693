import { readdirSync, readFileSync } from "node:fs";
import { join } from "node:path";
import { tmpdir } from "node:os";
import { mkdtempSync, rmSync } from "node:fs";

import { afterAll, describe, expect, it } from "vitest";

import { depthBytes, manifestJson, resizeDepthNearest, writeBundleDir } from "../src/bundle.js";
import type { SceneBundleData } from "../src/bundle.js";
import { mulberry32 } from "./helpers.js";

const scratch = mkdtempSync(join(tmpdir(), "bundle-test-"));
afterAll(() => rmSync(scratch, { recursive: true, force: true }));

function sampleBundle(): SceneBundleData {
  return {
    imageId: "sample",
    width: 4,
    height: 3,
    intrinsics: { fx: 100, fy: 100, cx: 2, cy: 1.5 },
    gravity: { pitch: -0.1, roll: 0.0 },
    depth: new Float32Array(12).fill(2.5),
    instances: [{ instanceId: 0, label: "crate", rle: [0, 12] }],
  };
}

describe("resizeDepthNearest", () => {
  it("returns the input when sizes already match", () => {
    const values = Float32Array.from([1, 2, 3, 4]);
    expect(resizeDepthNearest({ width: 2, height: 2, values }, 2, 2)).toBe(values);
  });

  it("doubles a 2x2 map into 2x2 blocks", () => {
    const values = Float32Array.from([1, 2, 3, 4]);
    const out = resizeDepthNearest({ width: 2, height: 2, values }, 4, 4);
    expect(Array.from(out)).toEqual([
      1, 1, 2, 2,
      1, 1, 2, 2,
      3, 3, 4, 4,
      3, 3, 4, 4,
    ]);
  });

  it("downscales by sampling pixel centers", () => {
    const values = Float32Array.from([...Array(16).keys()]);
    const out = resizeDepthNearest({ width: 4, height: 4, values }, 2, 2);
    expect(Array.from(out)).toEqual([5, 7, 13, 15]);
  });

  it("never invents a depth value", () => {
    const rand = mulberry32(7);
    const values = Float32Array.from({ length: 35 }, () => 0.5 + rand() * 9);
    const out = resizeDepthNearest({ width: 7, height: 5, values }, 13, 11);
    const source = new Set(values);
    for (const v of out) expect(source.has(v)).toBe(true);
  });
});

describe("depthBytes", () => {
  it("serializes little-endian float32", () => {
    const buf = depthBytes(Float32Array.from([1.5, -2.0, 0.0]));
    const expected = Buffer.alloc(12);
    expected.writeFloatLE(1.5, 0);
    expected.writeFloatLE(-2.0, 4);
    expected.writeFloatLE(0.0, 8);
    expect(buf.equals(expected)).toBe(true);
  });
});

describe("manifestJson", () => {
  it("writes the documented key layout", () => {
    const parsed = JSON.parse(manifestJson(sampleBundle()));
    expect(parsed).toEqual({
      image_id: "sample",
      width: 4,
      height: 3,
      intrinsics: { fx: 100, fy: 100, cx: 2, cy: 1.5 },
      gravity: { pitch: -0.1, roll: 0.0 },
      instances: [{ instance_id: 0, label: "crate", rle: [0, 12] }],
    });
  });

  it("is indented and newline-terminated", () => {
    const text = manifestJson(sampleBundle());
    expect(text.startsWith('{\n  "image_id"')).toBe(true);
    expect(text.endsWith("}\n")).toBe(true);
  });
});

describe("writeBundleDir", () => {
  it("writes manifest.json and a correctly sized depth.raw", () => {
    const dir = join(scratch, "ok");
    writeBundleDir(sampleBundle(), dir);
    expect(readdirSync(dir).sort()).toEqual(["depth.raw", "manifest.json"]);
    expect(readFileSync(join(dir, "depth.raw")).length).toBe(4 * 3 * 4);
    const manifest = JSON.parse(readFileSync(join(dir, "manifest.json"), "utf-8"));
    expect(manifest.image_id).toBe("sample");
  });

  it("leaves no temp files behind", () => {
    const dir = join(scratch, "clean");
    writeBundleDir(sampleBundle(), dir);
    expect(readdirSync(dir).filter((n) => n.includes(".tmp-"))).toEqual([]);
  });

  it("rejects a depth array that disagrees with the size", () => {
    const bundle = { ...sampleBundle(), depth: new Float32Array(5) };
    expect(() => writeBundleDir(bundle, join(scratch, "bad"))).toThrow("expected 4x3");
  });
});
