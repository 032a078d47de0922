import { describe, expect, it } from "vitest";

import { drainSseBuffer, parseSseBlock } from "../src/client.js";
import type { SseEvent } from "../src/types.js";

describe("SSE parsing", () => {
  it("parses a full block", () => {
    const event = parseSseBlock(
      'id: 4\nevent: resolved\ndata: {"revision": 4, "kind": "resolved", "selected": "c2"}',
    );
    expect(event).not.toBeNull();
    expect(event!.revision).toBe(4);
    expect(event!.type).toBe("resolved");
    expect(event!.view.selected).toBe("c2");
  });

  it("ignores keep-alive comments", () => {
    expect(parseSseBlock(": keep-alive")).toBeNull();
  });

  it("drains complete blocks and keeps the tail", () => {
    const events: SseEvent[] = [];
    const tail = drainSseBuffer(
      'id: 1\nevent: question-asked\ndata: {"revision": 1, "kind": "question"}\n\n'
        + "id: 2\nevent: res",
      (e) => events.push(e),
    );
    expect(events).toHaveLength(1);
    expect(events[0]!.type).toBe("question-asked");
    expect(tail).toBe("id: 2\nevent: res");
  });

  it("handles several blocks in one chunk", () => {
    const events: SseEvent[] = [];
    const chunk =
      'id: 1\nevent: a\ndata: {"revision": 1, "kind": "created"}\n\n'
      + ": keep-alive\n\n"
      + 'id: 2\nevent: b\ndata: {"revision": 2, "kind": "created"}\n\n';
    const tail = drainSseBuffer(chunk, (e) => events.push(e));
    expect(events.map((e) => e.revision)).toEqual([1, 2]);
    expect(tail).toBe("");
  });
});
