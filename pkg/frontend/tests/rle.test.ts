import { describe, expect, it } from "vitest";

import {
  decodeMask,
  decodeRle,
  encodeRle,
  popcount,
  sliceGet,
} from "../src/rle.js";
import type { MaskJson } from "../src/types.js";

describe("decodeRle", () => {
  it("expands alternating runs starting with zeros", () => {
    expect(Array.from(decodeRle([3, 2, 3], 8))).toEqual(
      [0, 0, 0, 1, 1, 0, 0, 0]);
  });

  it("uses a leading zero run when the first cell is set", () => {
    expect(Array.from(decodeRle([0, 2, 1], 3))).toEqual([1, 1, 0]);
  });

  it("handles all-zero and all-one slices", () => {
    expect(Array.from(decodeRle([4], 4))).toEqual([0, 0, 0, 0]);
    expect(Array.from(decodeRle([0, 4], 4))).toEqual([1, 1, 1, 1]);
  });

  it("rejects runs that do not sum to the slice size", () => {
    expect(() => decodeRle([2, 1], 4)).toThrow(/sum/);
  });
});

describe("encodeRle", () => {
  it("is the inverse of decodeRle", () => {
    const cases = [[3, 2, 3], [0, 2, 1], [4], [0, 4], [1, 1, 1, 1]];
    for (const runs of cases) {
      const total = runs.reduce((a, b) => a + b, 0);
      expect(encodeRle(decodeRle(runs, total))).toEqual(runs);
    }
  });

  it("round trips random slices", () => {
    let seed = 12345;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    for (let trial = 0; trial < 50; trial++) {
      const flat = new Uint8Array(200);
      for (let i = 0; i < flat.length; i++) flat[i] = rand() < 0.3 ? 1 : 0;
      const decoded = decodeRle(encodeRle(flat), flat.length);
      expect(Array.from(decoded)).toEqual(Array.from(flat));
    }
  });
});

describe("mask helpers", () => {
  const mask: MaskJson = {
    grid: { w: 3, h: 2, cell: 0.1 },
    slices: [[6], [0, 6], [1, 2, 3], [5, 1]],
  };

  it("decodes one slice per orientation", () => {
    const slices = decodeMask(mask);
    expect(slices).toHaveLength(4);
    expect(popcount(slices[0])).toBe(0);
    expect(popcount(slices[1])).toBe(6);
    expect(popcount(slices[2])).toBe(2);
    expect(popcount(slices[3])).toBe(1);
  });

  it("indexes cells row-major", () => {
    const slices = decodeMask(mask);
    // slice 2 decodes to [0,1,1,0,0,0]: cells (1,0) and (2,0)
    expect(sliceGet(slices[2], 1, 0, 3)).toBe(true);
    expect(sliceGet(slices[2], 2, 0, 3)).toBe(true);
    expect(sliceGet(slices[2], 0, 0, 3)).toBe(false);
    expect(sliceGet(slices[2], 1, 1, 3)).toBe(false);
    // slice 3 decodes to [0,0,0,0,0,1]: cell (2,1)
    expect(sliceGet(slices[3], 2, 1, 3)).toBe(true);
  });
});
