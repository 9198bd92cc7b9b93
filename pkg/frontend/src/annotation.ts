/** Draft annotation state: rectangles per orientation with undo support. */

import { ORIENTATIONS, cellIndexRange } from "./geometry.js";
import { popcount } from "./rle.js";
import type {
  GridInfo,
  Orientation,
  Rect,
  RectsByOrientation,
} from "./types.js";

export interface RoomBox {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

/** Tolerance for the room-bounds check, matching the service. */
const BOUNDS_TOLERANCE = 1e-6;

/**
 * Rectangles the annotator has drawn so far, grouped by the orientation
 * slice they mark as valid. Every mutation is undoable.
 */
export class DraftAnnotation {
  private rects: Map<Orientation, Rect[]>;
  private undoStack: { orientation: Orientation; rect: Rect }[];

  constructor() {
    this.rects = new Map();
    this.undoStack = [];
  }

  /** Normalize drag corners so x0 < x1 and y0 < y1. */
  static normalize(
    ax: number,
    ay: number,
    bx: number,
    by: number,
  ): Rect {
    return [
      Math.min(ax, bx),
      Math.min(ay, by),
      Math.max(ax, bx),
      Math.max(ay, by),
    ];
  }

  /**
   * Reject rectangles the server would refuse: degenerate area or corners
   * outside the room. Returns null when the rectangle is acceptable.
   */
  static validate(rect: Rect, room: RoomBox): string | null {
    const [x0, y0, x1, y1] = rect;
    if (x1 <= x0 || y1 <= y0) return "rectangle needs positive area";
    if (
      x0 < room.xMin - BOUNDS_TOLERANCE ||
      y0 < room.yMin - BOUNDS_TOLERANCE ||
      x1 > room.xMax + BOUNDS_TOLERANCE ||
      y1 > room.yMax + BOUNDS_TOLERANCE
    ) {
      return "rectangle leaves the room bounds";
    }
    return null;
  }

  add(orientation: Orientation, rect: Rect, room: RoomBox): string | null {
    const problem = DraftAnnotation.validate(rect, room);
    if (problem) return problem;
    const list = this.rects.get(orientation) ?? [];
    list.push(rect);
    this.rects.set(orientation, list);
    this.undoStack.push({ orientation, rect });
    return null;
  }

  /** Remove the most recently added rectangle. Returns false when empty. */
  undo(): boolean {
    const last = this.undoStack.pop();
    if (!last) return false;
    const list = this.rects.get(last.orientation);
    if (list) {
      list.pop();
      if (list.length === 0) this.rects.delete(last.orientation);
    }
    return true;
  }

  clear(): void {
    this.rects.clear();
    this.undoStack = [];
  }

  rectsFor(orientation: Orientation): readonly Rect[] {
    return this.rects.get(orientation) ?? [];
  }

  get count(): number {
    let n = 0;
    for (const list of this.rects.values()) n += list.length;
    return n;
  }

  get isEmpty(): boolean {
    return this.count === 0;
  }

  /** Request body payload. Empty drafts must be blocked before this call. */
  toPayload(): RectsByOrientation {
    const out: RectsByOrientation = {};
    for (const o of ORIENTATIONS) {
      const list = this.rects.get(o);
      if (list && list.length > 0) out[o] = list.map((r) => [...r] as Rect);
    }
    return out;
  }

  /**
   * Rasterize the draft exactly as the service does: each rectangle covers
   * the cells whose centers fall inside it, clipped to the grid. Returns
   * one row-major slice per orientation.
   */
  rasterize(grid: GridInfo): Uint8Array[] {
    const total = grid.width * grid.height;
    const slices = ORIENTATIONS.map(() => new Uint8Array(total));
    for (let plane = 0; plane < ORIENTATIONS.length; plane++) {
      const list = this.rects.get(ORIENTATIONS[plane]);
      if (!list) continue;
      for (const [x0, y0, x1, y1] of list) {
        const [ix0, ix1] = cellIndexRange(
          x0, x1, grid.origin[0], grid.cell_size, grid.width);
        const [iy0, iy1] = cellIndexRange(
          y0, y1, grid.origin[1], grid.cell_size, grid.height);
        for (let iy = iy0; iy <= iy1; iy++) {
          for (let ix = ix0; ix <= ix1; ix++) {
            slices[plane][iy * grid.width + ix] = 1;
          }
        }
      }
    }
    return slices;
  }

  popcounts(grid: GridInfo): [number, number, number, number] {
    const counts = this.rasterize(grid).map(popcount);
    return [counts[0], counts[1], counts[2], counts[3]];
  }
}
