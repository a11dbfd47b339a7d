/**
 * Session layer: hello handshake, sequence tracking, and typed dispatch of
 * inbound envelopes. The UI holds no game truth — every state change is
 * driven by a server message, and every user gesture maps to exactly one
 * outbound protocol message.
 */
import { decodeEnvelope, encodeEnvelope, } from "./protocol.js";
export class SessionClient {
    transport;
    role;
    events;
    sessionId = "";
    outSeq = 0;
    inSeq = -1;
    /** every inbound envelope in wire order, for audits and resync */
    received = [];
    constructor(transport, role, events = {}) {
        this.transport = transport;
        this.role = role;
        this.events = events;
        transport.onFrame((frame) => this.handleFrame(frame));
        transport.onClose(() => this.events.onClose?.());
        this.send("hello", { role });
    }
    send(kind, payload) {
        const env = {
            seq: this.outSeq,
            session_id: this.sessionId,
            kind,
            payload,
        };
        this.outSeq += 1;
        this.transport.send(encodeEnvelope(env));
    }
    sendAction(action) {
        this.send("action", action);
    }
    handleFrame(frame) {
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
    close() {
        this.transport.close();
    }
}
