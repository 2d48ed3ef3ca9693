/**
 * Run-length codec for binary instance masks.
 *
 * Runs are row-major and alternate starting with the zero run, so a mask
 * whose first pixel is foreground begins with a 0. Every run after the
 * first is positive and the counts sum to width * height.
 */

export function encodeMask(mask: Uint8Array, width: number, height: number): number[] {
  if (mask.length !== width * height) {
    throw new Error(`mask has ${mask.length} pixels, expected ${width}x${height}`);
  }
  const runs: number[] = [];
  let value = 0;
  let count = 0;
  for (let i = 0; i < mask.length; i++) {
    const v = mask[i] ? 1 : 0;
    if (v === value) {
      count++;
    } else {
      runs.push(count);
      value = v;
      count = 1;
    }
  }
  runs.push(count);
  return runs;
}

export function decodeMask(runs: number[], width: number, height: number): Uint8Array {
  validateRuns(runs, width, height);
  const mask = new Uint8Array(width * height);
  let pos = 0;
  let value = 0;
  for (const run of runs) {
    if (value) mask.fill(1, pos, pos + run);
    pos += run;
    value ^= 1;
  }
  return mask;
}

export function validateRuns(runs: number[], width: number, height: number): void {
  if (runs.length === 0) {
    throw new Error("rle must contain at least one run");
  }
  if (runs[0] < 0 || runs.slice(1).some((r) => r < 1)) {
    throw new Error(`rle runs must be positive after the first: [${runs}]`);
  }
  if (!runs.every(Number.isInteger)) {
    throw new Error(`rle runs must be integers: [${runs}]`);
  }
  const total = runs.reduce((a, b) => a + b, 0);
  if (total !== width * height) {
    throw new Error(`rle runs sum to ${total}, expected ${width * height}`);
  }
}
