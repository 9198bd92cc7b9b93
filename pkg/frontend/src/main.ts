/** Browser app: annotate placement regions and explore program masks. */

import { ApiError, PlacementApi } from "./api.js";
import { DraftAnnotation } from "./annotation.js";
import { ExplorerSession } from "./explorer.js";
import {
  ORIENTATIONS,
  Transform,
  positionToCell,
  roomBounds,
} from "./geometry.js";
import { decodeMask, popcount, sliceGet } from "./rle.js";
import {
  drawMaskOverlay,
  drawQueryPreview,
  drawRects,
  drawScene,
} from "./render.js";
import type { CaseDetail, Orientation } from "./types.js";

type Mode = "annotate" | "explore";

const CANVAS_W = 720;
const CANVAS_H = 600;

const api = new PlacementApi("");

const state = {
  mode: "annotate" as Mode,
  caseDetail: null as CaseDetail | null,
  transform: null as Transform | null,
  draft: new DraftAnnotation(),
  session: null as ExplorerSession | null,
  orientation: "N" as Orientation,
  slices: null as Uint8Array[] | null,
  slicesStale: false,
  dragStart: null as [number, number] | null,
  cursor: null as [number, number] | null,
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

const root = document.getElementById("app")!;
const toolbar = el("div", { class: "toolbar" });
const modeAnnotate = el("button", {}, "Annotate");
const modeExplore = el("button", {}, "Explore");
const caseSelect = el("select", { class: "case-select" });
const tabBar = el("div", { class: "tabs" });
const canvas = el("canvas", {
  width: String(CANVAS_W),
  height: String(CANVAS_H),
});
const side = el("div", { class: "side" });
const queryInfo = el("div", { class: "query-info" });
const errorBox = el("div", { class: "error", role: "alert" });
const statusBox = el("div", { class: "status" });

const annotatorInput = el("input", {
  type: "text",
  value: "anonymous",
  title: "annotator name",
});
const undoRectBtn = el("button", {}, "Undo rectangle");
const clearBtn = el("button", {}, "Clear");
const submitBtn = el("button", {}, "Submit annotation");

const programInput = el("textarea", { rows: "3", class: "program" });
const runBtn = el("button", {}, "Run program");
const stepBtn = el("button", {}, "Auto step");
const undoPlaceBtn = el("button", {}, "Undo placement");

const tabButtons = new Map<Orientation, HTMLButtonElement>();
for (const o of ORIENTATIONS) {
  const btn = el("button", { class: "tab" }, o);
  btn.addEventListener("click", () => {
    state.orientation = o;
    refreshTabs();
    draw();
  });
  tabButtons.set(o, btn);
  tabBar.appendChild(btn);
}

function refreshTabs(): void {
  for (const [o, btn] of tabButtons) {
    btn.classList.toggle("active", o === state.orientation);
  }
  modeAnnotate.classList.toggle("active", state.mode === "annotate");
  modeExplore.classList.toggle("active", state.mode === "explore");
}

function showError(message: string): void {
  errorBox.textContent = message;
  errorBox.style.display = message ? "block" : "none";
}

function showStatus(message: string): void {
  statusBox.textContent = message;
}

function surface(err: unknown): void {
  if (err instanceof ApiError) showError(`server: ${err.detail}`);
  else showError(String(err));
}

function ctx2d(): CanvasRenderingContext2D {
  return canvas.getContext("2d")!;
}

function activeScene() {
  if (state.mode === "explore" && state.session) return state.session.current;
  return state.caseDetail?.scene ?? null;
}

function draw(): void {
  const ctx = ctx2d();
  ctx.clearRect(0, 0, CANVAS_W, CANVAS_H);
  const scene = activeScene();
  const t = state.transform;
  if (!scene || !t) return;
  drawScene(ctx, scene, t);

  const plane = ORIENTATIONS.indexOf(state.orientation);
  if (state.mode === "explore" && state.slices && !state.slicesStale) {
    drawMaskOverlay(ctx, state.slices[plane], scene.grid, t);
  }
  if (state.mode === "annotate") {
    drawRects(ctx, state.draft.rectsFor(state.orientation), t);
    if (state.dragStart && state.cursor) {
      const rect = DraftAnnotation.normalize(
        state.dragStart[0], state.dragStart[1],
        state.cursor[0], state.cursor[1]);
      drawRects(ctx, [rect], t, "rgba(214, 39, 40, 0.45)");
    }
  }
  if (state.mode === "explore" && state.cursor && state.caseDetail) {
    const cell = positionToCell(state.cursor[0], state.cursor[1], scene.grid);
    let allowed = false;
    if (cell && state.slices && !state.slicesStale) {
      allowed = sliceGet(
        state.slices[plane], cell[0], cell[1], scene.grid.width);
    }
    drawQueryPreview(
      ctx, state.cursor, state.caseDetail.query.size,
      state.orientation, t, allowed);
  }
}

function canvasMeters(ev: MouseEvent): [number, number] | null {
  const t = state.transform;
  if (!t) return null;
  const box = canvas.getBoundingClientRect();
  return t.toMeters(ev.clientX - box.left, ev.clientY - box.top);
}

async function loadCase(caseId: string): Promise<void> {
  showError("");
  try {
    const detail = await api.getCase(caseId);
    state.caseDetail = detail;
    state.transform = new Transform(
      roomBounds(detail.scene.room), CANVAS_W, CANVAS_H);
    state.draft = new DraftAnnotation();
    state.session = new ExplorerSession(detail.scene);
    state.slices = null;
    state.slicesStale = false;
    const q = detail.query;
    queryInfo.textContent =
      `place: ${q.category} (${q.size[0].toFixed(2)} x ` +
      `${q.size[1].toFixed(2)} m) in ${detail.scene.scene_type}`;
    programInput.value = "attach(wall_0,up)";
    showStatus(`loaded case ${caseId}`);
    draw();
  } catch (err) {
    surface(err);
  }
}

canvas.addEventListener("mousedown", (ev) => {
  if (state.mode !== "annotate") return;
  state.dragStart = canvasMeters(ev);
});

canvas.addEventListener("mousemove", (ev) => {
  state.cursor = canvasMeters(ev);
  draw();
});

canvas.addEventListener("mouseleave", () => {
  state.cursor = null;
  draw();
});

canvas.addEventListener("mouseup", (ev) => {
  if (state.mode !== "annotate" || !state.dragStart) return;
  const end = canvasMeters(ev);
  const scene = activeScene();
  if (end && scene) {
    const rect = DraftAnnotation.normalize(
      state.dragStart[0], state.dragStart[1], end[0], end[1]);
    const problem = state.draft.add(
      state.orientation, rect, roomBounds(scene.room));
    if (problem) showError(problem);
    else showError("");
    showStatus(`${state.draft.count} rectangle(s) drafted`);
  }
  state.dragStart = null;
  draw();
});

canvas.addEventListener("click", (ev) => {
  if (state.mode !== "explore") return;
  const scene = activeScene();
  const detail = state.caseDetail;
  if (!scene || !detail || !state.slices || state.slicesStale) return;
  const pos = canvasMeters(ev);
  if (!pos) return;
  const cell = positionToCell(pos[0], pos[1], scene.grid);
  if (!cell) return;
  const placed = state.session!.placeAt(
    state.slices, cell[0], cell[1], state.orientation, detail.query);
  if (placed) {
    state.slicesStale = true;
    showStatus(`placed ${placed.id}; rerun the program for a fresh mask`);
    draw();
  }
});

modeAnnotate.addEventListener("click", () => {
  state.mode = "annotate";
  refreshTabs();
  applyModeVisibility();
  draw();
});

modeExplore.addEventListener("click", () => {
  state.mode = "explore";
  refreshTabs();
  applyModeVisibility();
  draw();
});

undoRectBtn.addEventListener("click", () => {
  if (!state.draft.undo()) showStatus("nothing to undo");
  else showStatus(`${state.draft.count} rectangle(s) drafted`);
  draw();
});

clearBtn.addEventListener("click", () => {
  state.draft.clear();
  showStatus("draft cleared");
  draw();
});

submitBtn.addEventListener("click", async () => {
  const detail = state.caseDetail;
  if (!detail) return;
  if (state.draft.isEmpty) {
    showError("draw at least one rectangle before submitting");
    return;
  }
  showError("");
  try {
    const stored = await api.submitAnnotation(
      detail.id, state.draft.toPayload(), annotatorInput.value || "anonymous");
    const counts = stored.popcounts.join("/");
    showStatus(`saved annotation for ${stored.case_id} (cells ${counts})`);
  } catch (err) {
    surface(err);
  }
});

runBtn.addEventListener("click", async () => {
  const detail = state.caseDetail;
  const scene = activeScene();
  if (!detail || !scene) return;
  showError("");
  try {
    const res = await api.execute(
      programInput.value.trim(), detail.query, { scene });
    state.slices = decodeMask(res.mask);
    state.slicesStale = false;
    const counts = state.slices.map(popcount);
    if (counts.some((n, i) => n !== res.popcounts[i])) {
      showError("decoded mask disagrees with server popcounts");
    }
    showStatus(`mask has ${res.total} valid cells (${counts.join("/")})`);
    draw();
  } catch (err) {
    surface(err);
  }
});

stepBtn.addEventListener("click", async () => {
  const scene = activeScene();
  if (!scene || !state.session) return;
  showError("");
  try {
    const res = await api.step(scene);
    if (res.done) {
      showStatus("scene complete: nothing more to place");
      return;
    }
    state.session.adopt(res.scene);
    state.slicesStale = true;
    showStatus(
      `placed ${res.object_id} (score ${res.score?.toFixed(3)}) ` +
      `via ${res.program}`);
    draw();
  } catch (err) {
    surface(err);
  }
});

undoPlaceBtn.addEventListener("click", () => {
  if (!state.session?.undo()) showStatus("nothing to undo");
  else {
    state.slicesStale = true;
    showStatus("reverted last placement");
  }
  draw();
});

function applyModeVisibility(): void {
  const annotate = state.mode === "annotate";
  for (const node of [annotatorInput, undoRectBtn, clearBtn, submitBtn]) {
    node.style.display = annotate ? "" : "none";
  }
  for (const node of [programInput, runBtn, stepBtn, undoPlaceBtn]) {
    node.style.display = annotate ? "none" : "";
  }
}

async function boot(): Promise<void> {
  toolbar.append(modeAnnotate, modeExplore, caseSelect);
  side.append(
    queryInfo, annotatorInput, undoRectBtn, clearBtn, submitBtn,
    programInput, runBtn, stepBtn, undoPlaceBtn, errorBox, statusBox);
  root.append(toolbar, tabBar, canvas, side);
  refreshTabs();
  applyModeVisibility();
  showError("");
  try {
    const cases = await api.listCases();
    for (const c of cases) {
      const opt = el("option", { value: c.id });
      opt.textContent = `${c.id} (${c.category})`;
      caseSelect.appendChild(opt);
    }
    caseSelect.addEventListener("change", () => loadCase(caseSelect.value));
    if (cases.length > 0) await loadCase(cases[0].id);
    else showStatus("no cases in this dataset");
  } catch (err) {
    surface(err);
  }
}

boot();
