/**
 * Browser glue: config discovery, file encoding, and re-rendering the
 * page from the store's state. Everything interesting happens in
 * state.ts and render.ts; this module only touches the DOM.
 */

import { ClientConfig, DraftUpload } from "./api.js";
import { Store } from "./state.js";
import {
  renderAnalysis,
  renderBanner,
  renderCorrect,
  renderProblem,
  renderRedoNotice,
  renderSummary,
  renderSummaryError,
  renderTranscript,
} from "./render.js";

declare global {
  interface Window {
    VATE_UI_CONFIG?: { baseUrl?: string; token?: string; debug?: boolean };
  }
}

export function readConfig(): ClientConfig & { debug: boolean } {
  const inline = window.VATE_UI_CONFIG ?? {};
  const meta = (name: string) =>
    document.querySelector(`meta[name="${name}"]`)?.getAttribute("content") ??
    undefined;
  const baseUrl = inline.baseUrl ?? meta("vate-base-url");
  const token = inline.token ?? meta("vate-token");
  if (!baseUrl || !token) {
    throw new Error("missing API base URL or token configuration");
  }
  return { baseUrl, token, debug: inline.debug ?? false };
}

export function fileToDraft(file: File): Promise<DraftUpload> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onerror = () => reject(reader.error);
    reader.onload = () => {
      const url = reader.result as string;
      const comma = url.indexOf(",");
      resolve({
        data: url.slice(comma + 1),
        media_type: file.type || "image/png",
      });
    };
    reader.readAsDataURL(file);
  });
}

interface Roots {
  problem: HTMLElement;
  outcome: HTMLElement;
  chat: HTMLElement;
  summary: HTMLElement;
  banner: HTMLElement;
}

function getRoots(): Roots {
  const byId = (id: string) => {
    const el = document.getElementById(id);
    if (el === null) {
      throw new Error(`required element #${id} not found`);
    }
    return el;
  };
  return {
    problem: byId("problem"),
    outcome: byId("outcome"),
    chat: byId("chat"),
    summary: byId("summary"),
    banner: byId("banner"),
  };
}

export class App {
  private readonly roots: Roots;

  constructor(
    private readonly store: Store,
    private readonly studentId: string,
    private readonly debug: boolean,
  ) {
    this.roots = getRoots();
  }

  sync(): void {
    const state = this.store.getState();
    this.roots.banner.innerHTML = renderBanner(state.banner);

    if (state.problem !== null) {
      this.roots.problem.innerHTML = renderProblem(
        state.problem.statement,
        state.problem.knowledge_point_ids,
      );
    }

    switch (state.status) {
      case "redo_requested":
        this.roots.outcome.innerHTML = renderRedoNotice(state.redoReason);
        this.draftInput().disabled = false;
        break;
      case "correct":
        this.roots.outcome.innerHTML = renderCorrect();
        break;
      case "incorrect":
        this.roots.outcome.innerHTML =
          state.analysis !== null ? renderAnalysis(state.analysis) : "";
        break;
      default:
        this.roots.outcome.innerHTML = "";
    }

    if (state.sessionId !== null) {
      this.roots.chat.innerHTML = renderTranscript(
        state.transcript,
        state.pendingMessage,
        state.sessionClosed,
        this.debug,
      );
    } else {
      this.roots.chat.innerHTML = "";
    }
    this.chatInput().disabled =
      state.sessionId === null || state.sessionClosed;

    if (state.summary !== null) {
      this.roots.summary.innerHTML = renderSummary(state.summary);
    }
  }

  private draftInput(): HTMLInputElement {
    return document.getElementById("draft-input") as HTMLInputElement;
  }

  private chatInput(): HTMLInputElement {
    return document.getElementById("chat-input") as HTMLInputElement;
  }

  bind(): void {
    const answerForm = document.getElementById("answer-form") as HTMLFormElement;
    answerForm.addEventListener("submit", async (event) => {
      event.preventDefault();
      const answer = (document.getElementById("answer-input") as HTMLInputElement)
        .value;
      const files = this.draftInput().files;
      const draft =
        files !== null && files.length > 0
          ? await fileToDraft(files[0]!)
          : undefined;
      await this.store.submitAnswer(this.studentId, answer, draft);
      this.sync();
    });

    const chatForm = document.getElementById("chat-form") as HTMLFormElement;
    chatForm.addEventListener("submit", async (event) => {
      event.preventDefault();
      const input = this.chatInput();
      const text = input.value.trim();
      if (text === "") {
        return;
      }
      input.value = "";
      await this.store.sendMessage(text);
      this.sync();
    });

    const summaryButton = document.getElementById("summary-button");
    summaryButton?.addEventListener("click", async () => {
      const state = this.store.getState();
      if (state.sessionId === null) {
        this.roots.summary.innerHTML = renderSummaryError(
          "No session yet; submit an answer first.",
        );
        return;
      }
      await this.store.loadSummary();
      const after = this.store.getState();
      if (after.summary === null && after.banner !== null) {
        this.roots.summary.innerHTML = renderSummaryError(after.banner.message);
      } else {
        this.sync();
      }
    });

    // Retry affordance on retriable banners re-syncs from the server.
    this.roots.banner.addEventListener("click", async (event) => {
      const target = event.target as HTMLElement;
      if (target.classList.contains("retry")) {
        await this.store.refreshSession();
        this.sync();
      }
    });
  }
}
