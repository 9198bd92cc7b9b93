/** Placement exploration state: a scene plus an undo stack of snapshots. */

import { ORIENTATIONS, cellCenter } from "./geometry.js";
import { sliceGet } from "./rle.js";
import type {
  Orientation,
  QueryInfo,
  SceneObject,
  ScenePayload,
} from "./types.js";

export class ExplorerSession {
  private stack: ScenePayload[];
  current: ScenePayload;

  constructor(scene: ScenePayload) {
    this.stack = [];
    this.current = scene;
  }

  /** Number of undoable steps. */
  get depth(): number {
    return this.stack.length;
  }

  /** Next free id following the category_index naming the scenes use. */
  nextId(category: string): string {
    let next = 0;
    const prefix = `${category}_`;
    for (const obj of this.current.objects) {
      if (!obj.id.startsWith(prefix)) continue;
      const tail = Number(obj.id.slice(prefix.length));
      if (Number.isInteger(tail) && tail >= next) next = tail + 1;
    }
    return `${category}_${next}`;
  }

  /**
   * Place the queried object at a grid cell if the executed mask allows
   * that cell for the chosen orientation. Clicking an unset cell changes
   * nothing and returns null.
   */
  placeAt(
    slices: Uint8Array[],
    ix: number,
    iy: number,
    orientation: Orientation,
    query: QueryInfo,
  ): SceneObject | null {
    const grid = this.current.grid;
    const plane = ORIENTATIONS.indexOf(orientation);
    if (plane < 0) return null;
    if (ix < 0 || ix >= grid.width || iy < 0 || iy >= grid.height) return null;
    if (!sliceGet(slices[plane], ix, iy, grid.width)) return null;
    const placed: SceneObject = {
      id: this.nextId(query.category),
      category: query.category,
      size: [query.size[0], query.size[1]],
      position: cellCenter(ix, iy, grid),
      orientation,
      holds_humans: query.holds_humans,
    };
    this.push({ ...this.current, objects: [...this.current.objects, placed] });
    return placed;
  }

  /** Adopt a scene returned by the service, keeping the old one undoable. */
  adopt(scene: ScenePayload): void {
    this.push(scene);
  }

  undo(): boolean {
    const prev = this.stack.pop();
    if (!prev) return false;
    this.current = prev;
    return true;
  }

  private push(scene: ScenePayload): void {
    this.stack.push(this.current);
    this.current = scene;
  }
}
