/**
 * Session layer: hello handshake, sequence tracking, and typed dispatch of
 * inbound envelopes. The UI holds no game truth — every state change is
 * driven by a server message, and every user gesture maps to exactly one
 * outbound protocol message.
 */

import {
  ActionPayload,
  Envelope,
  decodeEnvelope,
  encodeEnvelope,
} from "./protocol.js";
import { Transport } from "./transport.js";

export type Role = "navigator" | "guide" | "observer";

export interface SessionEvents {
  onEnvelope?: (env: Envelope) => void;
  onDesync?: (expected: number, got: number) => void;
  onClose?: () => void;
}

export class SessionClient {
  sessionId = "";
  private outSeq = 0;
  private inSeq = -1;
  /** every inbound envelope in wire order, for audits and resync */
  readonly received: Envelope[] = [];

  constructor(
    private transport: Transport,
    readonly role: Role,
    private events: SessionEvents = {},
  ) {
    transport.onFrame((frame) => this.handleFrame(frame));
    transport.onClose(() => this.events.onClose?.());
    this.send("hello", { role });
  }

  send(kind: Envelope["kind"], payload: Record<string, unknown>): void {
    const env: Envelope = {
      seq: this.outSeq,
      session_id: this.sessionId,
      kind,
      payload,
    };
    this.outSeq += 1;
    this.transport.send(encodeEnvelope(env));
  }

  sendAction(action: ActionPayload): void {
    this.send("action", action as unknown as Record<string, unknown>);
  }

  private handleFrame(frame: string): void {
    const env = decodeEnvelope(frame);
    if (env.seq !== this.inSeq + 1) {
      // A stale or skipped seq means the stream desynced; surface it so the
      // app can resync from the last episode_start rather than guess.
      this.events.onDesync?.(this.inSeq + 1, env.seq);
      return;
    }
    this.inSeq = env.seq;
    if (env.kind === "hello") {
      this.sessionId = String(env.payload["session_id"] ?? "");
    }
    this.received.push(env);
    this.events.onEnvelope?.(env);
  }

  close(): void {
    this.transport.close();
  }
}
