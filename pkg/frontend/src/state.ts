/**
 * Client-side view state and its transitions.
 *
 * The store never computes verdicts, analyses, or effectiveness itself;
 * every fact it holds came out of an API response. The chat transcript
 * mirrors the server session's committed turns, with at most one
 * optimistic student message shown while its request is in flight, and
 * rolled back if that request fails.
 */

import {
  Analysis,
  ApiClient,
  ApiError,
  DraftUpload,
  ProblemView,
  SessionSummary,
  Turn,
} from "./api.js";

export type SubmissionStatus =
  | "idle"
  | "submitting"
  | "correct"
  | "incorrect"
  | "redo_requested";

export interface Banner {
  kind: "retriable" | "error";
  message: string;
}

export interface ViewState {
  problem: ProblemView | null;
  status: SubmissionStatus;
  redoReason: string | null;
  analysis: Analysis | null;
  sessionId: string | null;
  sessionClosed: boolean;
  sessionEffective: boolean;
  transcript: Turn[];
  pendingMessage: string | null;
  banner: Banner | null;
  summary: SessionSummary | null;
}

export function initialState(): ViewState {
  return {
    problem: null,
    status: "idle",
    redoReason: null,
    analysis: null,
    sessionId: null,
    sessionClosed: false,
    sessionEffective: false,
    transcript: [],
    pendingMessage: null,
    banner: null,
    summary: null,
  };
}

function bannerFor(error: unknown): Banner {
  if (error instanceof ApiError) {
    return {
      kind: error.retriable ? "retriable" : "error",
      message: error.message,
    };
  }
  return { kind: "retriable", message: "Network problem; please retry." };
}

export class Store {
  private state: ViewState = initialState();

  constructor(private readonly api: ApiClient) {}

  getState(): ViewState {
    return this.state;
  }

  private patch(changes: Partial<ViewState>): ViewState {
    this.state = { ...this.state, ...changes };
    return this.state;
  }

  async loadProblem(problemId: string): Promise<ViewState> {
    try {
      const problem = await this.api.getProblem(problemId);
      return this.patch({ problem, banner: null });
    } catch (error) {
      return this.patch({ banner: bannerFor(error) });
    }
  }

  async submitAnswer(
    studentId: string,
    answer: string,
    draft?: DraftUpload,
  ): Promise<ViewState> {
    const problem = this.state.problem;
    if (problem === null) {
      throw new Error("no problem loaded");
    }
    this.patch({ status: "submitting", banner: null });
    let result;
    try {
      result = await this.api.submit(studentId, problem.problem_id, answer, draft);
    } catch (error) {
      return this.patch({ status: "idle", banner: bannerFor(error) });
    }

    if (result.verdict === "redo_requested") {
      return this.patch({
        status: "redo_requested",
        redoReason: result.redo_reason ?? null,
      });
    }
    if (result.verdict === "incorrect") {
      // Opening tutor turn is already committed server-side; fetch it so
      // the transcript starts in mirror.
      this.patch({
        status: "incorrect",
        redoReason: null,
        analysis: result.analysis ?? null,
        sessionId: result.session_id ?? null,
      });
      return this.refreshSession();
    }
    // Correct: the server flips any open session to effective and closes
    // it; resync rather than assume.
    this.patch({ status: "correct", redoReason: null });
    if (this.state.sessionId !== null) {
      return this.refreshSession();
    }
    return this.state;
  }

  async refreshSession(): Promise<ViewState> {
    const sessionId = this.state.sessionId;
    if (sessionId === null) {
      return this.state;
    }
    try {
      const session = await this.api.getSession(sessionId);
      return this.patch({
        transcript: session.turns,
        sessionClosed: session.closed,
        sessionEffective: session.effective,
        banner: null,
      });
    } catch (error) {
      return this.patch({ banner: bannerFor(error) });
    }
  }

  async sendMessage(text: string): Promise<ViewState> {
    const sessionId = this.state.sessionId;
    if (sessionId === null) {
      throw new Error("no open session");
    }
    if (this.state.pendingMessage !== null) {
      throw new Error("a chat request is already in flight");
    }
    this.patch({ pendingMessage: text, banner: null });
    try {
      const tutorTurn = await this.api.sendMessage(sessionId, text);
      const studentTurn: Turn = {
        speaker: "student",
        text,
        at: tutorTurn.at,
        guard_events: [],
      };
      return this.patch({
        transcript: [...this.state.transcript, studentTurn, tutorTurn],
        pendingMessage: null,
      });
    } catch (error) {
      if (error instanceof ApiError && error.code === "SessionClosed") {
        return this.patch({
          pendingMessage: null,
          sessionClosed: true,
          banner: { kind: "error", message: error.message },
        });
      }
      // Roll the optimistic student message back; the transcript shows
      // committed turns only.
      return this.patch({ pendingMessage: null, banner: bannerFor(error) });
    }
  }

  async loadSummary(): Promise<ViewState> {
    const sessionId = this.state.sessionId;
    if (sessionId === null) {
      throw new Error("no session to summarize");
    }
    try {
      const summary = await this.api.getSummary(sessionId);
      return this.patch({ summary, banner: null });
    } catch (error) {
      return this.patch({ summary: null, banner: bannerFor(error) });
    }
  }
}
