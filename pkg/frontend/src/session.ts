/**
 * Session client: seq bookkeeping, gap detection, latest-state buffering.
 *
 * The client never simulates anything; it only reflects what the service
 * streamed.  Rendering reads `latest` at its own pace, so dropped frames are
 * harmless.  A sequence gap raises `stale` until the next full state_update
 * resynchronizes the scene.
 */

import {
  CommandPayload,
  InboundMessage,
  StateUpdatePayload,
  encodeOutbound,
  parseInbound,
} from "./protocol.js";

export type SendFn = (text: string) => void;

export interface SessionEvents {
  onState?: (payload: StateUpdatePayload) => void;
  onError?: (message: string, echoSeq: number | null) => void;
  onStatus?: (connected: boolean) => void;
}

export class SessionClient {
  private outSeq = 0;
  private lastInSeq = 0;
  private sendFn: SendFn | null = null;

  latest: StateUpdatePayload | null = null;
  lastSeqSeen = 0;
  stale = false;
  connected = false;
  protocolErrors = 0;
  serverErrors: { message: string; echoSeq: number | null }[] = [];

  constructor(private events: SessionEvents = {}) {}

  attach(send: SendFn): void {
    this.sendFn = send;
    this.connected = true;
    this.events.onStatus?.(true);
  }

  detach(): void {
    this.sendFn = null;
    this.connected = false;
    this.events.onStatus?.(false);
  }

  /** Reset inbound bookkeeping for a fresh connection (outSeq keeps rising). */
  resetStream(): void {
    this.lastInSeq = 0;
    this.lastSeqSeen = 0;
    this.stale = false;
  }

  handleMessage(text: string): InboundMessage | null {
    const message = parseInbound(text);
    if (message === null) {
      this.protocolErrors += 1;
      return null;
    }
    if (this.lastInSeq > 0 && message.seq !== this.lastInSeq + 1) {
      this.stale = true; // gap: something was dropped between server and us
    }
    this.lastInSeq = Math.max(this.lastInSeq, message.seq);
    this.lastSeqSeen = this.lastInSeq;
    if (message.kind === "state_update") {
      this.latest = message.payload;
      this.stale = false; // a full state resynchronizes the scene
      this.events.onState?.(message.payload);
    } else if (message.kind === "error") {
      this.serverErrors.push({
        message: message.payload.message,
        echoSeq: message.payload.echo_seq,
      });
      this.events.onError?.(message.payload.message,
                            message.payload.echo_seq);
    }
    return message;
  }

  /** Emit one command with the next outbound seq; returns the sent message. */
  sendCommand(payload: CommandPayload) {
    if (!this.sendFn || !this.connected) {
      throw new Error("not connected as writer");
    }
    this.outSeq += 1;
    const message = { kind: "command" as const, seq: this.outSeq, payload };
    this.sendFn(encodeOutbound(message));
    return message;
  }
}
