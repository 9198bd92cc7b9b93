/** Grid and coordinate math kept in lockstep with the placement service. */

import type { GridInfo, Orientation } from "./types.js";

export const ORIENTATIONS: readonly Orientation[] = ["N", "E", "S", "W"];

/** Boundary tolerance in meters, matching the service convention. */
export const EPS = 1e-9;

/**
 * Inclusive index range of cells whose centers fall inside [lo, hi] on one
 * axis. Mirrors the server rasterizer so a rectangle drawn in the client
 * covers exactly the cells the service stores.
 */
export function cellIndexRange(
  lo: number,
  hi: number,
  origin: number,
  cell: number,
  count: number,
): [number, number] {
  let i0 = Math.ceil((lo - origin) / cell - 0.5 - EPS);
  let i1 = Math.floor((hi - origin) / cell - 0.5 + EPS);
  i0 = Math.max(i0, 0);
  i1 = Math.min(i1, count - 1);
  return [i0, i1];
}

/** Center of cell (ix, iy) in meters. */
export function cellCenter(
  ix: number,
  iy: number,
  grid: GridInfo,
): [number, number] {
  const [ox, oy] = grid.origin;
  return [ox + (ix + 0.5) * grid.cell_size, oy + (iy + 0.5) * grid.cell_size];
}

/** Cell containing a point in meters, or null when outside the grid. */
export function positionToCell(
  x: number,
  y: number,
  grid: GridInfo,
): [number, number] | null {
  const ix = Math.floor((x - grid.origin[0]) / grid.cell_size);
  const iy = Math.floor((y - grid.origin[1]) / grid.cell_size);
  if (ix < 0 || ix >= grid.width || iy < 0 || iy >= grid.height) return null;
  return [ix, iy];
}

/**
 * Half extents of an object footprint along x and y. Width spans x when
 * facing N or S; facing E or W swaps width and depth.
 */
export function orientedHalfExtents(
  size: [number, number],
  orientation: Orientation,
): [number, number] {
  const [w, d] = size;
  if (orientation === "E" || orientation === "W") return [d / 2, w / 2];
  return [w / 2, d / 2];
}

/** Unit facing vector for an orientation, x to the east and y to the north. */
export function orientationVector(o: Orientation): [number, number] {
  switch (o) {
    case "N":
      return [0, 1];
    case "E":
      return [1, 0];
    case "S":
      return [0, -1];
    case "W":
      return [-1, 0];
  }
}

/**
 * Invertible mapping between room meters and canvas pixels. Canvas y grows
 * downward, room y grows northward, so the transform flips the vertical
 * axis. Uniform scale preserves aspect ratio.
 */
export class Transform {
  readonly scale: number;
  readonly xMin: number;
  readonly yMax: number;
  readonly margin: number;

  constructor(
    bounds: { xMin: number; xMax: number; yMin: number; yMax: number },
    canvasWidth: number,
    canvasHeight: number,
    margin = 20,
  ) {
    const spanX = bounds.xMax - bounds.xMin;
    const spanY = bounds.yMax - bounds.yMin;
    const usableW = canvasWidth - 2 * margin;
    const usableH = canvasHeight - 2 * margin;
    this.scale = Math.min(usableW / spanX, usableH / spanY);
    this.xMin = bounds.xMin;
    this.yMax = bounds.yMax;
    this.margin = margin;
  }

  toPx(x: number, y: number): [number, number] {
    return [
      this.margin + (x - this.xMin) * this.scale,
      this.margin + (this.yMax - y) * this.scale,
    ];
  }

  toMeters(px: number, py: number): [number, number] {
    return [
      this.xMin + (px - this.margin) / this.scale,
      this.yMax - (py - this.margin) / this.scale,
    ];
  }
}

/** Axis-aligned bounds of a room polygon. */
export function roomBounds(room: [number, number][]): {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
} {
  const xs = room.map((p) => p[0]);
  const ys = room.map((p) => p[1]);
  return {
    xMin: Math.min(...xs),
    xMax: Math.max(...xs),
    yMin: Math.min(...ys),
    yMax: Math.max(...ys),
  };
}
