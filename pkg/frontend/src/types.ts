/** Payload shapes exchanged with the placement HTTP service. */

export type Orientation = "N" | "E" | "S" | "W";

export interface GridInfo {
  width: number;
  height: number;
  cell_size: number;
  origin: [number, number];
}

export interface SceneObject {
  id: string;
  category: string;
  size: [number, number];
  position: [number, number];
  orientation: Orientation;
  holds_humans: boolean;
}

export interface WallInfo {
  id: string;
  start: [number, number];
  end: [number, number];
}

export interface ScenePayload {
  id?: string;
  scene_type: string;
  room: [number, number][];
  objects: SceneObject[];
  walls: WallInfo[];
  grid: GridInfo;
}

/** Compact mask encoding: one run-length list per orientation slice. */
export interface MaskJson {
  grid: { w: number; h: number; cell: number };
  slices: number[][];
}

export interface QueryInfo {
  category: string;
  size: [number, number];
  holds_humans: boolean;
}

export interface CaseSummary {
  id: string;
  scene_id: string;
  object_id: string;
  category: string;
  n_context_objects: number;
}

export interface CaseDetail {
  id: string;
  scene_id: string;
  object_id: string;
  scene: ScenePayload;
  query: QueryInfo;
}

export interface ExecuteResponse {
  mask: MaskJson;
  popcounts: [number, number, number, number];
  total: number;
  grid: GridInfo;
}

/** Rectangle in room meters: [x0, y0, x1, y1] with x0 < x1 and y0 < y1. */
export type Rect = [number, number, number, number];

/** Rectangle lists keyed by the orientation slice they apply to. */
export type RectsByOrientation = Partial<Record<Orientation, Rect[]>>;

export interface AnnotationRecord {
  case_id: string;
  annotator: string;
  rects: RectsByOrientation;
  mask: MaskJson;
  popcounts: [number, number, number, number];
}

export interface StepResponse {
  done: boolean;
  scene: ScenePayload;
  object_id?: string;
  category?: string;
  program?: string;
  score?: number;
  placement?: [[number, number], Orientation];
}

export interface HealthResponse {
  status: string;
  scenes: number;
  cases: number;
  step_enabled: boolean;
}
