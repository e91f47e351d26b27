/** Browser bootstrap: wires the composer, contract cards and timeline
 * clicks to the API client and reducers. One active session per tab.
 */

import { ApiClient, TransportError } from "./api.js";
import { renderSession } from "./render.js";
import {
  applyConfirmOk,
  applyConfirmRefusal,
  applyReply,
  applyTransportError,
  applyUserMessage,
  beginConfirm,
  newSession,
  prefillFromSlot,
} from "./state.js";
import type { SessionState } from "./types.js";

const api = new ApiClient("");
let state: SessionState | null = null;
let lastMessage = "";

function redraw() {
  const root = document.getElementById("app");
  const input = document.getElementById("composer") as HTMLInputElement | null;
  if (!root || !state) return;
  root.innerHTML = renderSession(state);
  if (input && state.prefill) input.value = state.prefill;
}

async function send(text: string) {
  if (!state || !text.trim()) return;
  lastMessage = text;
  state = applyUserMessage(state, text);
  redraw();
  try {
    const result = await api.sendMessage(state.sessionId, text);
    state = result.ok
      ? applyReply(state, result.body)
      : applyTransportError(state, result.problem.detail);
  } catch (err) {
    if (!(err instanceof TransportError)) throw err;
    state = applyTransportError(state, err.message);
  }
  redraw();
}

async function confirm(contractId: string) {
  if (!state) return;
  state = beginConfirm(state, contractId);
  redraw();
  try {
    const result = await api.confirmContract(contractId);
    state = result.ok
      ? applyConfirmOk(state, contractId, result.body.issuance_token)
      : applyConfirmRefusal(state, contractId, result.problem);
  } catch (err) {
    if (!(err instanceof TransportError)) throw err;
    state = applyTransportError(state, err.message);
  }
  redraw();
}

async function boot() {
  const persona =
    new URLSearchParams(window.location.search).get("persona") ?? "residential";
  const created = await api.createSession(persona);
  if (!created.ok) {
    const root = document.getElementById("app");
    if (root) root.textContent = created.problem.detail;
    return;
  }
  state = newSession(created.body.id, created.body.persona);
  redraw();

  const input = document.getElementById("composer") as HTMLInputElement;
  const sendButton = document.getElementById("send");
  sendButton?.addEventListener("click", () => {
    void send(input.value);
    input.value = "";
  });
  input.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") {
      void send(input.value);
      input.value = "";
    }
  });

  document.getElementById("app")?.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.matches("button.confirm") && !target.hasAttribute("disabled")) {
      void confirm(target.dataset["id"] ?? "");
    } else if (target.matches("button.slot") && state) {
      state = prefillFromSlot(
        state,
        Number(target.dataset["slot"]),
        target.dataset["unit"] === "day" ? "day" : "hour",
      );
      redraw();
    } else if (target.matches("button.retry")) {
      void send(lastMessage);
    }
  });
}

void boot();
