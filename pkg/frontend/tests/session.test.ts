import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { SessionClient } from "../src/session.js";

const received: { kind: string; seq: number; payload: never }[] = JSON.parse(
  readFileSync(new URL("./fixtures/received_messages.json", import.meta.url),
               "utf-8"));

function connected(events = {}) {
  const sent: string[] = [];
  const client = new SessionClient(events);
  client.attach((text) => sent.push(text));
  return { client, sent };
}

describe("stream handling", () => {
  it("buffers the latest state across the captured stream", () => {
    const { client } = connected();
    for (const msg of received) {
      client.handleMessage(JSON.stringify(msg));
    }
    const updates = received.filter((m) => m.kind === "state_update");
    const last = updates[updates.length - 1] as { payload: { tick: number } };
    expect(client.latest?.tick).toBe(last.payload.tick);
    expect(client.stale).toBe(false);
    expect(client.serverErrors.length).toBe(1);
  });

  it("flags a seq gap and resyncs on the next full state", () => {
    const { client } = connected();
    const updates = received.filter((m) => m.kind === "state_update");
    client.handleMessage(JSON.stringify(updates[0]));
    expect(client.stale).toBe(false);
    client.handleMessage(JSON.stringify(updates[3])); // dropped messages
    expect(client.latest?.tick).toBe(
      (updates[3] as { payload: { tick: number } }).payload.tick);
    // gap was detected, but the full state_update already resynced the scene
    expect(client.stale).toBe(false);
    const nonState = { ...received.find((m) => m.kind === "error")!,
                       seq: 999 };
    client.handleMessage(JSON.stringify(nonState));
    expect(client.stale).toBe(true); // gap with no state payload: stale
  });

  it("counts malformed lines without dying", () => {
    const { client } = connected();
    client.handleMessage("definitely not json");
    client.handleMessage(JSON.stringify({ kind: "???", seq: 1, payload: {} }));
    expect(client.protocolErrors).toBe(2);
    expect(client.latest).toBeNull();
  });
});

describe("outbound", () => {
  it("assigns strictly increasing seq", () => {
    const { client, sent } = connected();
    const a = client.sendCommand({ stiffness: "low" });
    const b = client.sendCommand({ delta_l: [-1, 0.5, 0.5] });
    expect(a.seq).toBe(1);
    expect(b.seq).toBe(2);
    expect(sent.length).toBe(2);
  });

  it("refuses to send when detached", () => {
    const { client } = connected();
    client.detach();
    expect(() => client.sendCommand({ stiffness: "high" })).toThrow();
  });
});
