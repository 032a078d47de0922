/** Thin fetch client for the grounding service, including the SSE feed. */

import type { OutcomeView, SceneDoc, SessionCreated, SessionState, SseEvent } from "./types.js";

export class ServiceError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function jsonOrThrow<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ServiceError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ServiceClient {
  constructor(readonly baseUrl: string) {}

  async createSession(scene: SceneDoc): Promise<SessionCreated> {
    const response = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(scene),
    });
    return jsonOrThrow<SessionCreated>(response);
  }

  async getSession(id: string): Promise<SessionState> {
    return jsonOrThrow<SessionState>(await fetch(`${this.baseUrl}/sessions/${id}`));
  }

  async submitInstruction(id: string, text: string): Promise<OutcomeView> {
    const response = await fetch(`${this.baseUrl}/sessions/${id}/instruction`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text }),
    });
    return jsonOrThrow<OutcomeView>(response);
  }

  async submitResponse(id: string, text: string): Promise<OutcomeView> {
    const response = await fetch(`${this.baseUrl}/sessions/${id}/response`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text }),
    });
    return jsonOrThrow<OutcomeView>(response);
  }

  /**
   * Subscribe to the event stream. Resolves when the stream closes; in
   * replay mode the service closes after catching up.
   */
  async events(
    id: string,
    onEvent: (event: SseEvent) => void,
    options: { since?: number; replay?: boolean; signal?: AbortSignal } = {},
  ): Promise<void> {
    const params = new URLSearchParams();
    params.set("since", String(options.since ?? 0));
    if (options.replay) params.set("replay", "1");
    const response = await fetch(
      `${this.baseUrl}/sessions/${id}/events?${params}`,
      { signal: options.signal },
    );
    if (!response.ok || !response.body) {
      throw new ServiceError(response.status, "event stream unavailable");
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { value, done } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      buffer = drainSseBuffer(buffer, onEvent);
    }
    drainSseBuffer(buffer + "\n\n", onEvent);
  }
}

/** Parse complete SSE blocks out of `buffer`; returns the unparsed tail. */
export function drainSseBuffer(
  buffer: string,
  onEvent: (event: SseEvent) => void,
): string {
  for (;;) {
    const split = buffer.indexOf("\n\n");
    if (split < 0) return buffer;
    const block = buffer.slice(0, split);
    buffer = buffer.slice(split + 2);
    const event = parseSseBlock(block);
    if (event) onEvent(event);
  }
}

export function parseSseBlock(block: string): SseEvent | null {
  let revision = 0;
  let type = "message";
  let data = "";
  for (const line of block.split("\n")) {
    if (line.startsWith(":")) continue; // comment / keep-alive
    if (line.startsWith("id: ")) revision = Number(line.slice(4));
    else if (line.startsWith("event: ")) type = line.slice(7);
    else if (line.startsWith("data: ")) data += line.slice(6);
  }
  if (!data) return null;
  return { revision, type, view: JSON.parse(data) as SseEvent["view"] };
}
