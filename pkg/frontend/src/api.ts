/** Typed client for the annotation service's HTTP/JSON API.
 *
 * The console consumes exactly these five routes; everything it displays is
 * derived from their responses, so the service stays the single source of
 * truth for session state and metric math.
 */

export interface SessionConfig {
  k_ref: number;
  metric?: string;
  seed_size?: number;
  queries_per_round?: number;
  budget?: number;
  seed?: number;
  [extra: string]: unknown;
}

export interface CreateSessionRequest {
  config: SessionConfig;
  dataset_path: string;
  clustering_path: string;
}

export interface SessionSummary {
  session_id: string;
  status: "awaiting_labels" | "training" | "done";
  round: number;
  labels_used: number;
  budget: number;
  batch_size: number;
  estimate: number | null;
  metric: string;
  k_ref: number;
  has_payloads: boolean;
  suitable_for_human_annotation: boolean;
}

export interface QueryItem {
  id: string;
  payload: string | null;
  vector_preview: number[];
  labeled: boolean;
}

export interface QueryBatch {
  round: number;
  status: string;
  items: QueryItem[];
}

export interface LabelItem {
  id: string;
  label: number;
}

export interface LabelSubmission {
  labels: LabelItem[];
}

export interface LabelResult {
  estimate: number | null;
  labels_used: number;
  status: string;
  round: number;
  pending: number;
}

export interface CurvePoint {
  labels_used: number;
  estimate: number;
}

export interface Curve {
  metric: string;
  points: CurvePoint[];
  true_value: number | null;
}

/** Error carrying the HTTP status so callers can tell conflicts (409: stale
 * round or non-pending ids) from bad input (400) and vanished sessions (404).
 */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function parseDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return response.statusText || "request failed";
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await parseDetail(response));
    }
    return (await response.json()) as T;
  }

  createSession(request: CreateSessionRequest): Promise<SessionSummary> {
    return this.request("POST", "/sessions", request);
  }

  getSession(sessionId: string): Promise<SessionSummary> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}`);
  }

  getQueries(sessionId: string): Promise<QueryBatch> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/queries`);
  }

  postLabels(sessionId: string, submission: LabelSubmission): Promise<LabelResult> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/labels`, submission);
  }

  getCurve(sessionId: string): Promise<Curve> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/curve`);
  }
}
