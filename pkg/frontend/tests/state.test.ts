import { describe, expect, it } from "vitest";

import {
  applyConfirmRefusal,
  applyReply,
  applyTransportError,
  applyUserMessage,
  beginConfirm,
  canConfirm,
  newSession,
  prefillFromSlot,
  verdictFromTrace,
} from "../src/state.js";
import { renderContractCard, renderSession } from "../src/render.js";
import type { MessageReply } from "../src/types.js";

const REPLY: MessageReply = {
  response: "done",
  trace_id: "s1-t1",
  trace: [
    { event: "user", text: "check" },
    {
      event: "tool_executed",
      tool: "MVContractPlanner",
      beta_name: "feasibility_verdict",
      beta: { feasible: true, infeasible_steps: [], message: "feasible." },
      message: "feasible.",
    },
    { event: "final_text", text: "done" },
  ],
  new_contracts: [{ id: "c1", kind: "mv-connection", status: "draft" }],
};

describe("reducers", () => {
  it("keeps state immutable", () => {
    const s0 = newSession("s1", "dso");
    const s1 = applyUserMessage(s0, "hello");
    expect(s0.messages.length).toBe(0);
    expect(s1.messages.length).toBe(1);
  });

  it("orders badge before assistant text within a turn", () => {
    let s = newSession("s1", "dso");
    s = applyUserMessage(s, "check");
    s = applyReply(s, REPLY);
    expect(s.messages.map((m) => m.role)).toEqual([
      "user",
      "tool-badge",
      "assistant",
    ]);
  });

  it("clears a transport error on the next successful reply", () => {
    let s = newSession("s1", "dso");
    s = applyTransportError(s, "service unreachable");
    expect(renderSession(s)).toContain("transport-error");
    s = applyReply(s, REPLY);
    expect(s.transportError).toBeNull();
  });

  it("prefills an adjusted request from a timeline slot", () => {
    let s = newSession("s1", "dso");
    s = prefillFromSlot(s, 16, "hour");
    expect(s.prefill).toBe("shift to 16:00");
    s = prefillFromSlot(s, 21, "day");
    expect(s.prefill).toBe("shift to day 21");
    // sending the message consumes the prefill
    s = applyUserMessage(s, s.prefill);
    expect(s.prefill).toBe("");
  });
});

describe("verdict extraction", () => {
  it("never invents a verdict for verdict-free tools", () => {
    const verdict = verdictFromTrace({
      event: "tool_executed",
      tool: "ElectricityConsumption",
      beta: { profile: [0.1, 0.2] },
    });
    expect(verdict).toBeUndefined();
  });

  it("maps outage verdicts onto days", () => {
    const verdict = verdictFromTrace({
      event: "tool_executed",
      tool: "OutagePlanner",
      beta: { verdict: "alternative", alternative_start: 20, message: "…" },
    });
    expect(verdict?.feasible).toBe(false);
    expect(verdict?.unit).toBe("day");
    expect(verdict?.alternatives).toEqual([20]);
  });
});

describe("confirm affordance", () => {
  it("is disabled before gate approval exists and while in flight", () => {
    let s = newSession("s1", "dso");
    // no server-drafted contract: nothing confirmable at all
    expect(s.contracts.length).toBe(0);
    s = applyReply(applyUserMessage(s, "check"), REPLY);
    expect(canConfirm(s.contracts[0])).toBe(true);
    s = beginConfirm(s, "c1");
    expect(canConfirm(s.contracts[0])).toBe(false);
    expect(renderContractCard(s.contracts[0])).toContain("disabled");
  });

  it("a refused card renders the problem code and stays retryable", () => {
    let s = applyReply(applyUserMessage(newSession("s1", "dso"), "x"), REPLY);
    s = applyConfirmRefusal(s, "c1", {
      type: "about:blank",
      title: "gate refused",
      status: 409,
      code: "gate_refused",
      detail: "terms no longer match a feasible verdict",
    });
    const html = renderContractCard(s.contracts[0]);
    expect(html).toContain("gate_refused");
    expect(html).not.toContain("disabled");
    expect(s.contracts[0].status).toBe("refused");
  });
});
