/** Wire types of the gridchat HTTP API, plus the UI's own view-model. */

export interface ProblemDetails {
  type: string;
  title: string;
  status: number;
  code: string;
  detail: string;
}

/** One event of the server-side execution trace for a turn. */
export interface TraceEvent {
  event: string;
  tool?: string;
  arguments?: Record<string, unknown>;
  beta_name?: string;
  beta?: Record<string, unknown>;
  message?: string;
  text?: string;
}

export interface ContractStub {
  id: string;
  kind: string;
  status: string;
}

export interface MessageReply {
  response: string;
  trace_id: string;
  trace: TraceEvent[];
  new_contracts: ContractStub[];
}

export interface SessionCreated {
  id: string;
  persona: string;
}

export interface TranscriptEntry {
  role: string;
  content: string;
  name?: string;
}

export interface SessionDoc {
  id: string;
  persona: string;
  status: string;
  created_at: number;
  transcript: TranscriptEntry[];
}

export interface ConfirmOk {
  id: string;
  status: "confirmed";
  issuance_token?: string;
}

/**
 * Verdict payload as it arrived from the server. The UI never computes
 * feasibility itself; a verdict exists only when a tool execution in the
 * server trace carried one.
 */
export interface VerdictPayload {
  feasible: boolean;
  /** hours or days the server flagged as violating, empty when feasible */
  infeasibleSteps: number[];
  /** alternative start slots offered by the server, if any */
  alternatives: number[];
  message: string;
  /** "hour" for 24-step household/MV verdicts, "day" for outage windows */
  unit: "hour" | "day";
}

export interface UiMessage {
  role: "user" | "assistant" | "tool-badge";
  text: string;
  /** always present on tool-badge messages */
  tool?: string;
  verdict?: VerdictPayload;
}

export type ContractStatus = "draft" | "confirming" | "confirmed" | "refused";

export interface ContractCard {
  id: string;
  kind: string;
  status: ContractStatus;
  issuanceToken?: string;
  refusal?: { code: string; detail: string };
}

export interface SessionState {
  sessionId: string;
  persona: string;
  messages: UiMessage[];
  contracts: ContractCard[];
  /** composer prefill set by clicking a timeline slot */
  prefill: string;
  /** inline transport error, cleared on the next successful exchange */
  transportError: string | null;
}
