/** Canvas drawing for rooms, furniture, masks, and annotation rectangles. */

import {
  Transform,
  orientationVector,
  orientedHalfExtents,
} from "./geometry.js";
import type {
  GridInfo,
  Orientation,
  Rect,
  SceneObject,
  ScenePayload,
} from "./types.js";

const CATEGORY_COLORS: Record<string, string> = {
  bed: "#4e79a7",
  nightstand: "#f28e2b",
  wardrobe: "#59a14f",
  desk: "#b07aa1",
  chair: "#edc948",
  stool: "#e15759",
  sofa: "#76b7b2",
  coffee_table: "#ff9da7",
  tv_stand: "#9c755f",
  bookshelf: "#bab0ac",
  armchair: "#86bcb6",
  lamp: "#d37295",
  table: "#a0cbe8",
};

const FALLBACK_COLORS = [
  "#4e79a7", "#f28e2b", "#59a14f", "#b07aa1", "#edc948",
  "#e15759", "#76b7b2", "#ff9da7", "#9c755f", "#bab0ac",
];

export function categoryColor(category: string): string {
  const known = CATEGORY_COLORS[category];
  if (known) return known;
  let hash = 0;
  for (const ch of category) hash = (hash * 31 + ch.charCodeAt(0)) >>> 0;
  return FALLBACK_COLORS[hash % FALLBACK_COLORS.length];
}

export function drawRoom(
  ctx: CanvasRenderingContext2D,
  scene: ScenePayload,
  t: Transform,
): void {
  ctx.beginPath();
  scene.room.forEach(([x, y], i) => {
    const [px, py] = t.toPx(x, y);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.closePath();
  ctx.fillStyle = "#fdfdfa";
  ctx.fill();
  ctx.strokeStyle = "#333";
  ctx.lineWidth = 3;
  ctx.stroke();
}

function footprintPx(
  position: [number, number],
  size: [number, number],
  orientation: Orientation,
  t: Transform,
): [number, number, number, number] {
  const [hx, hy] = orientedHalfExtents(size, orientation);
  const [cx, cy] = position;
  const [left, top] = t.toPx(cx - hx, cy + hy);
  return [left, top, 2 * hx * t.scale, 2 * hy * t.scale];
}

export function drawObject(
  ctx: CanvasRenderingContext2D,
  obj: SceneObject,
  t: Transform,
  opts: { ghost?: boolean } = {},
): void {
  const [left, top, w, h] = footprintPx(
    obj.position, obj.size, obj.orientation, t);
  const color = categoryColor(obj.category);
  ctx.globalAlpha = opts.ghost ? 0.45 : 0.85;
  ctx.fillStyle = color;
  ctx.fillRect(left, top, w, h);
  ctx.globalAlpha = 1;
  ctx.strokeStyle = "#222";
  ctx.lineWidth = 1.5;
  if (opts.ghost) ctx.setLineDash([5, 4]);
  ctx.strokeRect(left, top, w, h);
  ctx.setLineDash([]);

  // Facing marker: a tick from the center toward the front edge.
  const [dx, dy] = orientationVector(obj.orientation);
  const [cx, cy] = obj.position;
  const [hx, hy] = orientedHalfExtents(obj.size, obj.orientation);
  const [p0x, p0y] = t.toPx(cx, cy);
  const [p1x, p1y] = t.toPx(cx + dx * hx, cy + dy * hy);
  ctx.beginPath();
  ctx.moveTo(p0x, p0y);
  ctx.lineTo(p1x, p1y);
  ctx.strokeStyle = "#111";
  ctx.lineWidth = 2;
  ctx.stroke();

  ctx.fillStyle = "#111";
  ctx.font = "11px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(obj.id, left + w / 2, top + h / 2 - 4);
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  scene: ScenePayload,
  t: Transform,
): void {
  drawRoom(ctx, scene, t);
  for (const obj of scene.objects) drawObject(ctx, obj, t);
}

/** Tint every set cell of one orientation slice. */
export function drawMaskOverlay(
  ctx: CanvasRenderingContext2D,
  slice: Uint8Array,
  grid: GridInfo,
  t: Transform,
  color = "rgba(46, 139, 87, 0.42)",
): void {
  const [ox, oy] = grid.origin;
  const cell = grid.cell_size;
  ctx.fillStyle = color;
  for (let iy = 0; iy < grid.height; iy++) {
    for (let ix = 0; ix < grid.width; ix++) {
      if (!slice[iy * grid.width + ix]) continue;
      const x0 = ox + ix * cell;
      const y1 = oy + (iy + 1) * cell;
      const [px, py] = t.toPx(x0, y1);
      ctx.fillRect(px, py, cell * t.scale + 0.5, cell * t.scale + 0.5);
    }
  }
}

/** Draw stored or in-progress annotation rectangles. */
export function drawRects(
  ctx: CanvasRenderingContext2D,
  rects: readonly Rect[],
  t: Transform,
  color = "rgba(214, 39, 40, 0.9)",
): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  for (const [x0, y0, x1, y1] of rects) {
    const [px, py] = t.toPx(x0, y1);
    ctx.strokeRect(px, py, (x1 - x0) * t.scale, (y1 - y0) * t.scale);
  }
}

/** Ghost of the queried object under the cursor. */
export function drawQueryPreview(
  ctx: CanvasRenderingContext2D,
  position: [number, number],
  size: [number, number],
  orientation: Orientation,
  t: Transform,
  allowed: boolean,
): void {
  const [left, top, w, h] = footprintPx(position, size, orientation, t);
  ctx.globalAlpha = 0.5;
  ctx.fillStyle = allowed ? "#2e8b57" : "#c0392b";
  ctx.fillRect(left, top, w, h);
  ctx.globalAlpha = 1;
  ctx.setLineDash([4, 3]);
  ctx.strokeStyle = "#222";
  ctx.strokeRect(left, top, w, h);
  ctx.setLineDash([]);
}
