/** HTML renderers for the view-model. Framework-free string templates so
 * the rendering rules are directly testable.
 */

import { buildTimeline, slotLabel } from "./timeline.js";
import { canConfirm } from "./state.js";
import type { ContractCard, SessionState, UiMessage } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderMessage(message: UiMessage): string {
  if (message.role === "tool-badge") {
    const verdict = message.verdict;
    const timeline =
      verdict && !verdict.feasible
        ? renderTimeline(message)
        : "";
    return (
      `<div class="msg tool-badge" data-tool="${escapeHtml(message.tool ?? "")}">` +
      `<span class="badge">${escapeHtml(message.text)}</span>${timeline}</div>`
    );
  }
  return `<div class="msg ${message.role}">${escapeHtml(message.text)}</div>`;
}

/** Infeasible verdicts render the affected slots highlighted; every slot
 * is clickable to prefill an adjusted request. */
export function renderTimeline(message: UiMessage): string {
  const verdict = message.verdict;
  if (!verdict) return "";
  const horizon = verdict.unit === "hour" ? 24 : 56;
  const cells = buildTimeline(verdict, horizon)
    .map((slot) => {
      const classes = ["slot"];
      if (!slot.secure) classes.push("violating");
      if (slot.alternative) classes.push("alternative");
      return (
        `<button class="${classes.join(" ")}" data-slot="${slot.index}" ` +
        `data-unit="${verdict.unit}">` +
        `${escapeHtml(slotLabel(slot.index, verdict.unit))}</button>`
      );
    })
    .join("");
  return `<div class="timeline">${cells}</div>`;
}

export function renderContractCard(card: ContractCard): string {
  const disabled = canConfirm(card) ? "" : " disabled";
  const refusal = card.refusal
    ? `<div class="refusal" data-code="${escapeHtml(card.refusal.code)}">` +
      `${escapeHtml(card.refusal.code)}: ${escapeHtml(card.refusal.detail)}</div>`
    : "";
  return (
    `<div class="contract ${card.status}" data-id="${escapeHtml(card.id)}">` +
    `<span class="kind">${escapeHtml(card.kind)}</span>` +
    `<span class="status">${escapeHtml(card.status)}</span>` +
    `<button class="confirm" data-id="${escapeHtml(card.id)}"${disabled}>` +
    `Confirm</button>${refusal}</div>`
  );
}

export function renderSession(state: SessionState): string {
  const messages = state.messages.map(renderMessage).join("");
  const contracts = state.contracts.map(renderContractCard).join("");
  const error = state.transportError
    ? `<div class="transport-error">${escapeHtml(state.transportError)}` +
      `<button class="retry">Retry</button></div>`
    : "";
  return (
    `<div class="session" data-id="${escapeHtml(state.sessionId)}">` +
    `<div class="messages">${messages}</div>` +
    `<div class="contracts">${contracts}</div>${error}</div>`
  );
}
