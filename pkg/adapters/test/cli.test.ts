import { execFileSync } from "node:child_process";
import { mkdirSync, mkdtempSync, readdirSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, afterEach, beforeAll, describe, expect, it, vi } from "vitest";

import { main } from "../src/cli.js";
import { makePng } from "./helpers.js";

const scratch = mkdtempSync(join(tmpdir(), "cli-test-"));
afterAll(() => rmSync(scratch, { recursive: true, force: true }));

let logLines: string[] = [];
let errLines: string[] = [];

beforeAll(() => {
  vi.spyOn(console, "log").mockImplementation((msg) => logLines.push(String(msg)));
  vi.spyOn(console, "error").mockImplementation((msg) => errLines.push(String(msg)));
  vi.spyOn(process.stdout, "write").mockImplementation(() => true);
  vi.spyOn(process.stderr, "write").mockImplementation(() => true);
});

afterEach(() => {
  logLines = [];
  errLines = [];
});

// Stage wrappers sniff the PNG header for the raster size, the same way a
// real model wrapper would inspect its input.
const SNIFF = [
  "import sys, json, struct",
  "payload = json.load(sys.stdin)",
  'head = open(payload["image"], "rb").read(24)',
  'w, h = struct.unpack(">II", head[16:24])',
].join("\n");

function writeStages(dir: string): Record<string, { command: string[] }> {
  mkdirSync(dir, { recursive: true });
  const scripts: Record<string, string> = {
    intrinsics: `${SNIFF}\nprint(json.dumps({"fx": 100.0, "fy": 100.0, "cx": w / 2, "cy": h / 2}))`,
    gravity: `${SNIFF}\nprint(json.dumps({"pitch": -0.1, "roll": 0.0}))`,
    depth: `${SNIFF}\nassert "intrinsics" in payload\nprint(json.dumps({"width": w, "height": h, "values": [2.0] * (w * h)}))`,
    tags: `${SNIFF}\nprint(json.dumps({"labels": ["crate"]}))`,
    detect: `${SNIFF}\nprint(json.dumps({"detections": [{"label": payload["labels"][0], "box": [0, 0, w, h]}]}))`,
    segment: [
      "import base64",
      SNIFF,
      "n = len(payload['detections'])",
      "ones = w * h // 2",
      "data = base64.b64encode(bytes([1] * ones + [0] * (w * h - ones))).decode()",
      'print(json.dumps({"masks": [{"width": w, "height": h, "data_b64": data}] * n}))',
    ].join("\n"),
  };
  const stages: Record<string, { command: string[] }> = {};
  for (const [name, body] of Object.entries(scripts)) {
    const path = join(dir, `${name}.py`);
    writeFileSync(path, body + "\n");
    stages[name] = { command: ["python3", path] };
  }
  return stages;
}

function writeConfig(name: string, stages: Record<string, unknown>): string {
  const path = join(scratch, name);
  writeFileSync(path, JSON.stringify({ stages }, null, 2));
  return path;
}

function classifyStage(dir: string, bestIndex: number): { command: string[] } {
  mkdirSync(dir, { recursive: true });
  const path = join(dir, `classify-${bestIndex}.py`);
  writeFileSync(
    path,
    [
      "import sys, json",
      "payload = json.load(sys.stdin)",
      "scores = [0.0] * len(payload['labels'])",
      `scores[${bestIndex}] = 1.0`,
      'print(json.dumps({"scores": scores}))',
    ].join("\n") + "\n",
  );
  return { command: ["python3", path] };
}

describe("estimate command", () => {
  const imagesDir = join(scratch, "images");
  const stagesDir = join(scratch, "stages");
  let configPath: string;

  beforeAll(() => {
    mkdirSync(imagesDir, { recursive: true });
    for (let i = 0; i < 3; i++) {
      writeFileSync(join(imagesDir, `photo-${i}.png`), makePng(6 + i, 5 + i));
    }
    writeFileSync(join(imagesDir, "notes.txt"), "not an image, not listed");
    configPath = writeConfig("adapter.json", writeStages(stagesDir));
  });

  it("writes a validating bundle per image", async () => {
    const outDir = join(scratch, "bundles");
    const code = await main([
      "estimate",
      imagesDir,
      outDir,
      "--config",
      configPath,
      "--jobs",
      "2",
    ]);
    expect(code).toBe(0);
    expect(readdirSync(outDir).sort()).toEqual(["photo-0", "photo-1", "photo-2"]);

    const stdout = execFileSync("python3", ["-m", "spatialqa.cli", "validate", outDir], {
      encoding: "utf-8",
    });
    expect(stdout.split("\n").filter((line) => line.includes(": ok ("))).toHaveLength(3);
  });

  it("keeps going past a corrupt image and exits 1", async () => {
    const brokenDir = join(scratch, "images-broken");
    mkdirSync(brokenDir, { recursive: true });
    writeFileSync(join(brokenDir, "fine.png"), makePng(6, 5));
    writeFileSync(join(brokenDir, "junk.png"), "these are not pixels");
    const outDir = join(scratch, "bundles-broken");
    const code = await main(["estimate", brokenDir, outDir, "--config", configPath]);
    expect(code).toBe(1);
    expect(readdirSync(outDir)).toEqual(["fine"]);
    expect(errLines.some((line) => line.includes("junk.png"))).toBe(true);
  });

  it("exits 3 when a model stage fails", async () => {
    const stages = writeStages(join(scratch, "stages-fail"));
    const broken = join(scratch, "stages-fail", "exploding.py");
    writeFileSync(broken, "import sys\nsys.exit(9)\n");
    stages.depth = { command: ["python3", broken] };
    const config = writeConfig("adapter-fail.json", stages);
    const code = await main([
      "estimate",
      imagesDir,
      join(scratch, "bundles-fail"),
      "--config",
      config,
    ]);
    expect(code).toBe(3);
  });

  it("drops filtered images before estimating", async () => {
    const stages = writeStages(join(scratch, "stages-filtered"));
    const dropAll = { ...stages, classify: classifyStage(join(scratch, "stages-filtered"), 9) };
    const config = writeConfig("adapter-dropall.json", dropAll);
    const outDir = join(scratch, "bundles-filtered");
    const code = await main(["estimate", imagesDir, outDir, "--config", config, "--filter"]);
    expect(code).toBe(0);
    expect(logLines.filter((line) => line.includes("dropped by filter"))).toHaveLength(3);
    expect(() => readdirSync(outDir)).toThrow(); // nothing survived, nothing written
  });

  it("needs a classify stage for --filter", async () => {
    const code = await main([
      "estimate",
      imagesDir,
      join(scratch, "x"),
      "--config",
      configPath,
      "--filter",
    ]);
    expect(code).toBe(1);
    expect(errLines.join("\n")).toContain("classify");
  });

  it("exits 1 on an empty image directory", async () => {
    const empty = join(scratch, "empty");
    mkdirSync(empty, { recursive: true });
    const code = await main(["estimate", empty, join(scratch, "y"), "--config", configPath]);
    expect(code).toBe(1);
  });

  it("exits 2 on a missing image directory", async () => {
    const code = await main([
      "estimate",
      join(scratch, "no-such-dir"),
      join(scratch, "z"),
      "--config",
      configPath,
    ]);
    expect(code).toBe(2);
  });

  it("exits 1 when the config lacks an estimation stage", async () => {
    const partial = writeConfig("adapter-partial.json", {
      depth: { command: ["python3", "-c", "pass"] },
    });
    const code = await main(["estimate", imagesDir, join(scratch, "w"), "--config", partial]);
    expect(code).toBe(1);
    expect(errLines.join("\n")).toContain("missing stage config");
  });
});

describe("filter command", () => {
  const imagesDir = join(scratch, "filter-images");

  beforeAll(() => {
    mkdirSync(imagesDir, { recursive: true });
    writeFileSync(join(imagesDir, "a.png"), makePng(4, 4));
    writeFileSync(join(imagesDir, "b.png"), makePng(4, 4));
  });

  it("prints keep for positive matches", async () => {
    const config = writeConfig("filter-keep.json", {
      classify: classifyStage(join(scratch, "stages-keep"), 0),
    });
    const code = await main(["filter", imagesDir, "--config", config]);
    expect(code).toBe(0);
    expect(logLines).toHaveLength(2);
    expect(logLines.every((line) => line.endsWith("\tkeep"))).toBe(true);
  });

  it("prints drop for negative matches", async () => {
    const config = writeConfig("filter-drop.json", {
      classify: classifyStage(join(scratch, "stages-drop"), 4),
    });
    const code = await main(["filter", imagesDir, "--config", config]);
    expect(code).toBe(0);
    expect(logLines.every((line) => line.endsWith("\tdrop"))).toBe(true);
  });
});

describe("argument handling", () => {
  it("prints usage and exits 2 with no command", async () => {
    expect(await main([])).toBe(2);
  });

  it("exits 0 for --help", async () => {
    expect(await main(["--help"])).toBe(0);
  });

  it("exits 2 for an unknown command", async () => {
    expect(await main(["transmogrify"])).toBe(2);
  });

  it("exits 2 for an unknown option", async () => {
    expect(await main(["estimate", "a", "b", "--config", "c", "--frobnicate"])).toBe(2);
  });

  it("exits 2 when --config is missing", async () => {
    expect(await main(["estimate", "a", "b"])).toBe(2);
  });
});
