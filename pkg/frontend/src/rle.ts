/** Run-length codec for mask slices, matching the service wire format. */

import type { MaskJson } from "./types.js";

/**
 * Expand one run-length list into a flat boolean row-major slice. Runs
 * alternate between zeros and ones, starting with zeros, so a slice whose
 * first cell is set begins with an explicit zero-length run.
 */
export function decodeRle(runs: number[], total: number): Uint8Array {
  const out = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of runs) {
    if (value === 1) out.fill(1, pos, pos + run);
    pos += run;
    value = 1 - value;
  }
  if (pos !== total) {
    throw new Error(`run lengths sum to ${pos}, expected ${total}`);
  }
  return out;
}

/** Compress a flat boolean slice into the alternating run-length list. */
export function encodeRle(flat: Uint8Array): number[] {
  const runs: number[] = [];
  let value = 0;
  let run = 0;
  for (const cell of flat) {
    const bit = cell ? 1 : 0;
    if (bit === value) {
      run += 1;
    } else {
      runs.push(run);
      value = bit;
      run = 1;
    }
  }
  runs.push(run);
  return runs;
}

/** Number of set cells in a flat slice. */
export function popcount(flat: Uint8Array): number {
  let n = 0;
  for (const cell of flat) if (cell) n += 1;
  return n;
}

/** Decode all four orientation slices of a mask payload. */
export function decodeMask(mask: MaskJson): Uint8Array[] {
  const total = mask.grid.w * mask.grid.h;
  return mask.slices.map((runs) => decodeRle(runs, total));
}

/** Value of cell (ix, iy) in a decoded row-major slice. */
export function sliceGet(
  flat: Uint8Array,
  ix: number,
  iy: number,
  width: number,
): boolean {
  return flat[iy * width + ix] === 1;
}
