/**
 * Model stages behind a uniform JSON protocol.
 *
 * Which model runs each stage is configuration, not code: the adapter
 * config maps a stage name to either a subprocess command or an HTTP
 * endpoint. Both receive one JSON payload (always including the image
 * path) and must answer with one JSON document on stdout / in the
 * response body. Swapping a depth model means editing the config.
 */

import { spawn } from "node:child_process";
import { readFileSync } from "node:fs";

export interface Intrinsics {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
}

/** Camera pitch/roll in radians; positive pitch looks up. */
export interface Gravity {
  pitch: number;
  roll: number;
}

export interface DepthMap {
  width: number;
  height: number;
  values: Float32Array; // row-major, meters
}

export interface Detection {
  label: string;
  box: [number, number, number, number]; // x0, y0, x1, y1 in pixels
}

export interface BinaryMask {
  width: number;
  height: number;
  data: Uint8Array; // one byte per pixel, nonzero = foreground
}

export interface ModelProviders {
  intrinsics(imagePath: string): Promise<Intrinsics>;
  gravity(imagePath: string): Promise<Gravity>;
  depth(imagePath: string, intrinsics: Intrinsics): Promise<DepthMap>;
  tags(imagePath: string): Promise<string[]>;
  detect(imagePath: string, labels: string[]): Promise<Detection[]>;
  segment(imagePath: string, detections: Detection[]): Promise<BinaryMask[]>;
  classify?(imagePath: string, labels: string[]): Promise<number[]>;
}

/** A model stage failed: bad exit, bad HTTP status, or unparseable reply. */
export class StageClientError extends Error {}

export class ProviderConfigError extends Error {}

interface StageSpec {
  command?: string[];
  endpoint?: string;
  timeout_ms?: number;
}

interface AdapterConfig {
  stages: Record<string, StageSpec>;
}

/** The stages estimation needs; filtering additionally needs "classify". */
export const ESTIMATE_STAGES = ["intrinsics", "gravity", "depth", "tags", "detect", "segment"];

export function loadAdapterConfig(path: string): AdapterConfig {
  let parsed: unknown;
  try {
    parsed = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new ProviderConfigError(`${path}: ${(err as Error).message}`);
  }
  const config = parsed as AdapterConfig;
  if (typeof config !== "object" || config === null || typeof config.stages !== "object") {
    throw new ProviderConfigError(`${path}: expected an object with a "stages" map`);
  }
  for (const [name, spec] of Object.entries(config.stages)) {
    const ways = Number(Array.isArray(spec.command)) + Number(typeof spec.endpoint === "string");
    if (ways !== 1) {
      throw new ProviderConfigError(`stage "${name}" needs exactly one of command/endpoint`);
    }
  }
  return config;
}

export function requireStages(config: AdapterConfig, names: string[]): void {
  const missing = names.filter((name) => !(name in config.stages));
  if (missing.length > 0) {
    throw new ProviderConfigError(`missing stage config: ${missing.join(", ")}`);
  }
}

function runCommand(spec: string[], payload: unknown, timeoutMs: number): Promise<unknown> {
  return new Promise((resolve, reject) => {
    const child = spawn(spec[0], spec.slice(1), { stdio: ["pipe", "pipe", "pipe"] });
    const out: Buffer[] = [];
    const err: Buffer[] = [];
    const timer = setTimeout(() => {
      child.kill();
      reject(new StageClientError(`${spec[0]} timed out after ${timeoutMs}ms`));
    }, timeoutMs);
    child.stdout.on("data", (c) => out.push(c));
    child.stderr.on("data", (c) => err.push(c));
    child.on("error", (e) => {
      clearTimeout(timer);
      reject(new StageClientError(`${spec[0]}: ${e.message}`));
    });
    child.on("close", (code) => {
      clearTimeout(timer);
      if (code !== 0) {
        const tail = Buffer.concat(err).toString("utf-8").slice(-400);
        reject(new StageClientError(`${spec[0]} exited ${code}: ${tail}`));
        return;
      }
      try {
        resolve(JSON.parse(Buffer.concat(out).toString("utf-8")));
      } catch {
        reject(new StageClientError(`${spec[0]} did not print JSON`));
      }
    });
    child.stdin.end(JSON.stringify(payload));
  });
}

async function callEndpoint(url: string, payload: unknown, timeoutMs: number): Promise<unknown> {
  let response: Response;
  try {
    response = await fetch(url, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
      signal: AbortSignal.timeout(timeoutMs),
    });
  } catch (err) {
    throw new StageClientError(`${url}: ${(err as Error).message}`);
  }
  if (!response.ok) {
    throw new StageClientError(`${url}: HTTP ${response.status}`);
  }
  try {
    return await response.json();
  } catch {
    throw new StageClientError(`${url} did not return JSON`);
  }
}

export function runStage(spec: StageSpec, payload: unknown): Promise<unknown> {
  const timeoutMs = spec.timeout_ms ?? 300_000;
  if (spec.command) return runCommand(spec.command, payload, timeoutMs);
  return callEndpoint(spec.endpoint!, payload, timeoutMs);
}

function asNumber(doc: Record<string, unknown>, key: string, stage: string): number {
  const value = doc[key];
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new StageClientError(`${stage} reply has no numeric "${key}"`);
  }
  return value;
}

/** Depth replies carry values inline or as base64 little-endian float32. */
export function parseDepthReply(doc: Record<string, unknown>): DepthMap {
  const width = asNumber(doc, "width", "depth");
  const height = asNumber(doc, "height", "depth");
  const count = width * height;
  let values: Float32Array;
  if (Array.isArray(doc.values)) {
    values = Float32Array.from(doc.values as number[]);
  } else if (typeof doc.data_b64 === "string") {
    const raw = Buffer.from(doc.data_b64, "base64");
    values = new Float32Array(count);
    for (let i = 0; i < count && i * 4 + 3 < raw.length; i++) {
      values[i] = raw.readFloatLE(i * 4);
    }
    if (raw.length !== count * 4) {
      throw new StageClientError(`depth data_b64 has ${raw.length} bytes, expected ${count * 4}`);
    }
  } else {
    throw new StageClientError('depth reply needs "values" or "data_b64"');
  }
  if (values.length !== count) {
    throw new StageClientError(`depth reply has ${values.length} values for ${width}x${height}`);
  }
  return { width, height, values };
}

function parseMaskReply(doc: Record<string, unknown>): BinaryMask {
  const width = asNumber(doc, "width", "segment");
  const height = asNumber(doc, "height", "segment");
  if (typeof doc.data_b64 !== "string") {
    throw new StageClientError('mask reply needs "data_b64" (one byte per pixel)');
  }
  const data = new Uint8Array(Buffer.from(doc.data_b64, "base64"));
  if (data.length !== width * height) {
    throw new StageClientError(`mask has ${data.length} bytes, expected ${width * height}`);
  }
  return { width, height, data };
}

/** Wire the configured stage commands/endpoints up as providers. */
export function configuredProviders(config: AdapterConfig): ModelProviders {
  const stage = (name: string): StageSpec => {
    const spec = config.stages[name];
    if (!spec) throw new ProviderConfigError(`stage "${name}" is not configured`);
    return spec;
  };
  return {
    async intrinsics(imagePath) {
      const doc = (await runStage(stage("intrinsics"), { image: imagePath })) as Record<string, unknown>;
      return {
        fx: asNumber(doc, "fx", "intrinsics"),
        fy: asNumber(doc, "fy", "intrinsics"),
        cx: asNumber(doc, "cx", "intrinsics"),
        cy: asNumber(doc, "cy", "intrinsics"),
      };
    },
    async gravity(imagePath) {
      const doc = (await runStage(stage("gravity"), { image: imagePath })) as Record<string, unknown>;
      return { pitch: asNumber(doc, "pitch", "gravity"), roll: asNumber(doc, "roll", "gravity") };
    },
    async depth(imagePath, intrinsics) {
      const doc = await runStage(stage("depth"), { image: imagePath, intrinsics });
      return parseDepthReply(doc as Record<string, unknown>);
    },
    async tags(imagePath) {
      const doc = (await runStage(stage("tags"), { image: imagePath })) as Record<string, unknown>;
      if (!Array.isArray(doc.labels)) throw new StageClientError('tags reply needs "labels"');
      return (doc.labels as unknown[]).map(String);
    },
    async detect(imagePath, labels) {
      const doc = (await runStage(stage("detect"), { image: imagePath, labels })) as Record<string, unknown>;
      if (!Array.isArray(doc.detections)) throw new StageClientError('detect reply needs "detections"');
      return (doc.detections as Detection[]).map((d) => ({
        label: String(d.label),
        box: d.box,
      }));
    },
    async segment(imagePath, detections) {
      const doc = (await runStage(stage("segment"), { image: imagePath, detections })) as Record<
        string,
        unknown
      >;
      if (!Array.isArray(doc.masks)) throw new StageClientError('segment reply needs "masks"');
      return (doc.masks as Record<string, unknown>[]).map(parseMaskReply);
    },
    ...(config.stages.classify
      ? {
          async classify(imagePath: string, labels: string[]) {
            const doc = (await runStage(stage("classify"), { image: imagePath, labels })) as Record<
              string,
              unknown
            >;
            if (!Array.isArray(doc.scores)) throw new StageClientError('classify reply needs "scores"');
            return (doc.scores as unknown[]).map(Number);
          },
        }
      : {}),
  };
}
