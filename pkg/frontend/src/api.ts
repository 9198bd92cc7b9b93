/** Thin fetch client for the placement service. */

import type {
  AnnotationRecord,
  CaseDetail,
  CaseSummary,
  ExecuteResponse,
  HealthResponse,
  QueryInfo,
  RectsByOrientation,
  ScenePayload,
  StepResponse,
} from "./types.js";

/** Error carrying the HTTP status and the server's detail message. */
export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`${status}: ${detail}`);
    this.status = status;
    this.detail = detail;
  }
}

async function request<T>(
  base: string,
  path: string,
  init?: RequestInit,
): Promise<T> {
  const response = await fetch(base + path, init);
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
      else detail = JSON.stringify(body);
    } catch {
      // keep the status text when the body is not JSON
    }
    throw new ApiError(response.status, detail);
  }
  return response.json() as Promise<T>;
}

function post(body: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  };
}

export class PlacementApi {
  constructor(readonly base: string = "") {}

  health(): Promise<HealthResponse> {
    return request(this.base, "/health");
  }

  listCases(): Promise<CaseSummary[]> {
    return request(this.base, "/cases");
  }

  getCase(caseId: string): Promise<CaseDetail> {
    return request(this.base, `/cases/${encodeURIComponent(caseId)}`);
  }

  getScene(sceneId: string): Promise<ScenePayload> {
    return request(this.base, `/scenes/${encodeURIComponent(sceneId)}`);
  }

  execute(
    program: string,
    query: QueryInfo,
    scene: { sceneId?: string; scene?: ScenePayload },
  ): Promise<ExecuteResponse> {
    return request(
      this.base,
      "/execute",
      post({
        program,
        query,
        scene_id: scene.sceneId ?? null,
        scene: scene.scene ?? null,
      }),
    );
  }

  step(scene: ScenePayload, seed = 0): Promise<StepResponse> {
    return request(this.base, "/step", post({ scene, seed }));
  }

  submitAnnotation(
    caseId: string,
    rects: RectsByOrientation,
    annotator: string,
  ): Promise<AnnotationRecord> {
    return request(
      this.base,
      "/annotations",
      post({ case_id: caseId, rects, annotator }),
    );
  }

  async listAnnotations(caseId?: string): Promise<AnnotationRecord[]> {
    const suffix = caseId ? `?case=${encodeURIComponent(caseId)}` : "";
    const body = await request<{ annotations: AnnotationRecord[] }>(
      this.base,
      `/annotations${suffix}`,
    );
    return body.annotations;
  }
}
