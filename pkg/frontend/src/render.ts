/**
 * HTML renderers for every view fragment.
 *
 * Pure string-in, string-out functions so the view layer is testable
 * without a DOM. All dynamic text comes from API responses and is
 * escaped here; nothing in this module fabricates answer content.
 */

import { Analysis, SessionSummary, Turn } from "./api.js";
import { Banner } from "./state.js";
import { compareToCohort } from "./cohort.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function formatDuration(ms: number): string {
  const totalSeconds = Math.round(ms / 1000);
  const minutes = Math.floor(totalSeconds / 60);
  const seconds = totalSeconds % 60;
  if (minutes === 0) {
    return `${seconds}s`;
  }
  return `${minutes}m ${String(seconds).padStart(2, "0")}s`;
}

export function renderProblem(statement: string, knowledgePointIds: string[]): string {
  const tags = knowledgePointIds
    .map((kp) => `<span class="kp-tag">${escapeHtml(kp)}</span>`)
    .join("");
  return `<section class="problem">
  <h2>Problem</h2>
  <p class="statement">${escapeHtml(statement)}</p>
  <div class="kp-tags">${tags}</div>
</section>`;
}

export function renderRedoNotice(reason: string | null): string {
  const detail = reason === null ? "" : `<p class="reason">${escapeHtml(reason)}</p>`;
  return `<section class="redo-notice">
  <p>Please redo this problem and upload a photo of your scratch work.</p>
  ${detail}
  <p class="hint">The draft upload has been re-enabled.</p>
</section>`;
}

export function renderCorrect(): string {
  return `<section class="success">
  <p>Correct! Nice work.</p>
</section>`;
}

export function renderAnalysis(analysis: Analysis): string {
  return `<section class="analysis">
  <h2>Where this went wrong</h2>
  <p class="cause">${escapeHtml(analysis.cause)}</p>
  <p class="suggestion">${escapeHtml(analysis.suggestion)}</p>
</section>`;
}

function renderTurn(turn: Turn, debug: boolean): string {
  const badge =
    debug && turn.guard_events.length > 0
      ? `<span class="guard-badge" title="${escapeHtml(turn.guard_events.join(", "))}">guarded</span>`
      : "";
  return `<div class="turn ${turn.speaker}">
    <span class="speaker">${turn.speaker === "tutor" ? "Tutor" : "You"}</span>
    <span class="text">${escapeHtml(turn.text)}</span>${badge}
  </div>`;
}

export function renderTranscript(
  turns: Turn[],
  pendingMessage: string | null,
  closed: boolean,
  debug = false,
): string {
  const committed = turns.map((turn) => renderTurn(turn, debug)).join("\n");
  const pending =
    pendingMessage === null
      ? ""
      : `<div class="turn student pending">
    <span class="speaker">You</span>
    <span class="text">${escapeHtml(pendingMessage)}</span>
  </div>`;
  const inputState = closed
    ? `<p class="chat-closed">This session is closed.</p>`
    : "";
  return `<section class="chat">
  <h2>Tutor chat</h2>
  <div class="transcript">
${committed}${pending}
  </div>
  ${inputState}
</section>`;
}

export function renderBanner(banner: Banner | null): string {
  if (banner === null) {
    return "";
  }
  const retry =
    banner.kind === "retriable"
      ? `<button class="retry" type="button">Retry</button>`
      : "";
  return `<div class="banner ${banner.kind}">
  <span>${escapeHtml(banner.message)}</span>${retry}
</div>`;
}

export function renderSummaryError(message: string): string {
  return `<section class="summary error-state">
  <p>${escapeHtml(message)}</p>
</section>`;
}

function masteryRows(summary: SessionSummary): string {
  return summary.per_kp
    .map(
      (kp) => `<tr>
      <td>${escapeHtml(kp.knowledge_point_id)}</td>
      <td>${(kp.arct * 100).toFixed(0)}%</td>
      <td>${kp.nqct}</td>
      <td>${kp.nvrs}</td>
    </tr>`,
    )
    .join("\n");
}

export function renderSummary(summary: SessionSummary): string {
  const kpIds = summary.per_kp.map((kp) => kp.knowledge_point_id);
  const overview =
    kpIds.length === 0
      ? `<p class="empty">No activity recorded for this session yet.</p>`
      : `<p>Study duration: ${formatDuration(summary.study_duration_ms)}</p>
    <p>Knowledge points: ${kpIds.map(escapeHtml).join(", ")}</p>
    <p>Dialogue: <span class="quality-badge ${escapeHtml(summary.quality.bucket)}">${escapeHtml(summary.quality.bucket)}</span>
      (${summary.quality.student_char_count} chars over ${summary.turn_count} turns)</p>
    <p>Outcome: ${summary.effective ? "resolved after dialogue" : "not yet resolved"}</p>`;

  const mastery =
    summary.per_kp.length === 0
      ? `<p class="empty">Mastery appears here after the first attempt.</p>`
      : `<table class="mastery">
    <thead><tr><th>Knowledge point</th><th>Correct rate</th><th>Attempts</th><th>Relearns</th></tr></thead>
    <tbody>
${masteryRows(summary)}
    </tbody>
  </table>`;

  const comparison = compareToCohort(summary.study_duration_ms, kpIds);
  const cohort =
    kpIds.length === 0
      ? `<p class="empty">Nothing to compare yet.</p>`
      : `<p>Your time: ${formatDuration(comparison.studentMs)}</p>
    <p>Cohort average: ${formatDuration(comparison.cohortMs)}</p>
    <p class="cohort-label">${comparison.label}</p>`;

  return `<section class="summary">
  <div class="panel overview">
    <h3>Overview</h3>
    ${overview}
  </div>
  <div class="panel mastery-panel">
    <h3>Mastery</h3>
    ${mastery}
  </div>
  <div class="panel cohort-panel">
    <h3>Time vs. cohort</h3>
    ${cohort}
  </div>
</section>`;
}
