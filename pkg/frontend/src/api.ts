/**
 * Typed client for the tutoring service HTTP API.
 *
 * Every request carries the bearer token; every non-2xx response is
 * raised as an ApiError built from the service's error envelope so the
 * view layer can branch on `code` and `retriable` without parsing
 * bodies itself.
 */

export interface ClientConfig {
  baseUrl: string;
  token: string;
}

export interface DraftUpload {
  data: string; // base64-encoded image bytes
  media_type: string;
}

export interface Analysis {
  cause: string;
  suggestion: string;
  source: "dual_stream" | "pool";
}

export interface SubmissionResult {
  verdict: "correct" | "incorrect" | "redo_requested";
  redo_reason?: string;
  analysis?: Analysis;
  session_id?: string;
}

export interface Turn {
  speaker: "tutor" | "student";
  text: string;
  at: number;
  guard_events: string[];
}

export interface SessionView {
  session_id: string;
  student_id: string;
  problem_id: string;
  effective: boolean;
  closed: boolean;
  turns: Turn[];
}

export interface KpMastery {
  knowledge_point_id: string;
  niact: number;
  nqct: number;
  arct: number;
  nvrs: number;
}

export interface SessionSummary {
  session_id: string;
  student_id: string;
  problem_id: string;
  effective: boolean;
  closed: boolean;
  study_duration_ms: number;
  quality: { bucket: string; student_char_count: number };
  per_kp: KpMastery[];
  turn_count: number;
}

export interface ProblemView {
  problem_id: string;
  statement: string;
  knowledge_point_ids: string[];
}

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly retriable: boolean;

  constructor(status: number, code: string, message: string, retriable: boolean) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.retriable = retriable;
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  private readonly config: ClientConfig;
  private readonly fetchImpl: FetchLike;

  constructor(config: ClientConfig, fetchImpl: FetchLike = fetch) {
    this.config = config;
    this.fetchImpl = fetchImpl;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(this.config.baseUrl + path, {
      method,
      headers: {
        Authorization: `Bearer ${this.config.token}`,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!response.ok) {
      let code = "BadRequest";
      let message = `HTTP ${response.status}`;
      let retriable = false;
      try {
        const envelope = await response.json();
        code = envelope.code ?? code;
        message = envelope.message ?? message;
        retriable = envelope.retriable ?? false;
      } catch {
        // non-JSON error body; keep the status-line message
      }
      throw new ApiError(response.status, code, message, retriable);
    }
    return (await response.json()) as T;
  }

  getProblem(problemId: string): Promise<ProblemView> {
    return this.request("GET", `/v1/problems/${encodeURIComponent(problemId)}`);
  }

  submit(
    studentId: string,
    problemId: string,
    answer: string,
    draft?: DraftUpload,
  ): Promise<SubmissionResult> {
    const body: Record<string, unknown> = {
      student_id: studentId,
      problem_id: problemId,
      answer,
    };
    if (draft !== undefined) {
      body.draft = draft;
    }
    return this.request("POST", "/v1/submissions", body);
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/v1/sessions/${encodeURIComponent(sessionId)}`);
  }

  sendMessage(sessionId: string, text: string): Promise<Turn> {
    return this.request(
      "POST",
      `/v1/sessions/${encodeURIComponent(sessionId)}/messages`,
      { text },
    );
  }

  getSummary(sessionId: string): Promise<SessionSummary> {
    return this.request(
      "GET",
      `/v1/sessions/${encodeURIComponent(sessionId)}/summary`,
    );
  }
}
