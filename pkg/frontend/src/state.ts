/** Session view-model and its pure reducers.
 *
 * Tool badges are inserted exactly where the server trace places tool
 * executions, and every verdict payload is lifted verbatim from the
 * trace; nothing here decides feasibility on its own.
 */

import type {
  ContractCard,
  MessageReply,
  ProblemDetails,
  SessionState,
  TraceEvent,
  UiMessage,
  VerdictPayload,
} from "./types.js";

export function newSession(sessionId: string, persona: string): SessionState {
  return {
    sessionId,
    persona,
    messages: [],
    contracts: [],
    prefill: "",
    transportError: null,
  };
}

/** Lift the verdict carried by a tool execution, if the server sent one. */
export function verdictFromTrace(event: TraceEvent): VerdictPayload | undefined {
  const beta = event.beta;
  if (!beta) return undefined;
  let feasible: boolean | undefined;
  if (typeof beta["feasible"] === "boolean") {
    feasible = beta["feasible"] as boolean;
  } else if (typeof beta["verdict"] === "string") {
    feasible = beta["verdict"] === "possible";
  }
  if (feasible === undefined) return undefined;
  const alternatives: number[] = [];
  if (Array.isArray(beta["alternative_starts"])) {
    for (const v of beta["alternative_starts"] as unknown[]) {
      if (typeof v === "number") alternatives.push(v);
    }
  } else if (typeof beta["alternative_start"] === "number") {
    alternatives.push(beta["alternative_start"]);
  }
  const steps = Array.isArray(beta["infeasible_steps"])
    ? (beta["infeasible_steps"] as unknown[]).filter(
        (v): v is number => typeof v === "number",
      )
    : [];
  return {
    feasible,
    infeasibleSteps: steps,
    alternatives,
    message: event.message ?? String(beta["message"] ?? ""),
    unit: event.tool === "OutagePlanner" ? "day" : "hour",
  };
}

export function applyUserMessage(state: SessionState, text: string): SessionState {
  const message: UiMessage = { role: "user", text };
  return { ...state, prefill: "", messages: [...state.messages, message] };
}

/** Fold a turn reply into the view-model: badges in trace order, then the
 * assistant text, then any newly drafted contract cards. */
export function applyReply(state: SessionState, reply: MessageReply): SessionState {
  const appended: UiMessage[] = [];
  for (const event of reply.trace) {
    if (event.event !== "tool_executed" || !event.tool) continue;
    appended.push({
      role: "tool-badge",
      tool: event.tool,
      text: `Used ${event.tool}`,
      verdict: verdictFromTrace(event),
    });
  }
  appended.push({ role: "assistant", text: reply.response });
  const cards: ContractCard[] = reply.new_contracts.map((c) => ({
    id: c.id,
    kind: c.kind,
    status: "draft",
  }));
  return {
    ...state,
    transportError: null,
    messages: [...state.messages, ...appended],
    contracts: [...state.contracts, ...cards],
  };
}

export function badgeCount(state: SessionState): number {
  return state.messages.filter((m) => m.role === "tool-badge").length;
}

/** The confirm action is available only for a server-drafted card that is
 * not already confirmed and not in flight. */
export function canConfirm(card: ContractCard): boolean {
  return card.status === "draft" || card.status === "refused";
}

function updateCard(
  state: SessionState,
  id: string,
  patch: Partial<ContractCard>,
): SessionState {
  return {
    ...state,
    contracts: state.contracts.map((c) => (c.id === id ? { ...c, ...patch } : c)),
  };
}

export function beginConfirm(state: SessionState, id: string): SessionState {
  return updateCard(state, id, { status: "confirming", refusal: undefined });
}

/** A card renders confirmed only on a server 200. */
export function applyConfirmOk(
  state: SessionState,
  id: string,
  issuanceToken?: string,
): SessionState {
  return updateCard(state, id, { status: "confirmed", issuanceToken });
}

/** Gate refusals are rendered verbatim with their reason code. */
export function applyConfirmRefusal(
  state: SessionState,
  id: string,
  problem: ProblemDetails,
): SessionState {
  return updateCard(state, id, {
    status: "refused",
    refusal: { code: problem.code, detail: problem.detail },
  });
}

export function applyTransportError(state: SessionState, detail: string): SessionState {
  return { ...state, transportError: detail };
}

/** Clicking a timeline slot prefills an adjusted request. */
export function prefillFromSlot(
  state: SessionState,
  slot: number,
  unit: "hour" | "day",
): SessionState {
  const label =
    unit === "hour" ? `${String(slot).padStart(2, "0")}:00` : `day ${slot}`;
  return { ...state, prefill: `shift to ${label}` };
}
