/** Thin typed client over the service HTTP/JSON API.
 *
 * All feasibility information flows through these payloads; the client
 * performs no physics. `fetch` is injectable so tests can replay
 * recorded exchanges.
 */

import type {
  ConfirmOk,
  MessageReply,
  ProblemDetails,
  SessionCreated,
  SessionDoc,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export type ApiResult<T> =
  | { ok: true; body: T }
  | { ok: false; problem: ProblemDetails };

/** Transport-level failure (service unreachable); always retryable. */
export class TransportError extends Error {
  readonly retryable = true;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<ApiResult<T>> {
    let response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers: { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new TransportError(`service unreachable: ${String(err)}`);
    }
    const payload = (await response.json()) as Record<string, unknown>;
    if (response.status >= 400) {
      return { ok: false, problem: payload as unknown as ProblemDetails };
    }
    return { ok: true, body: payload as unknown as T };
  }

  createSession(persona: string): Promise<ApiResult<SessionCreated>> {
    return this.request("POST", "/sessions", { persona });
  }

  getSession(id: string): Promise<ApiResult<SessionDoc>> {
    return this.request("GET", `/sessions/${id}`);
  }

  sendMessage(sessionId: string, text: string): Promise<ApiResult<MessageReply>> {
    return this.request("POST", `/sessions/${sessionId}/messages`, { text });
  }

  confirmContract(contractId: string): Promise<ApiResult<ConfirmOk>> {
    return this.request("POST", `/contracts/${contractId}/confirm`);
  }
}
