/**
 * Wire protocol mirror: newline-delimited JSON envelopes with a closed set
 * of message kinds. The same schema rides over the browser WebSocket (one
 * envelope per text frame) and the TCP stream transport.
 */
import { z } from "zod";
export const MAX_FRAME_BYTES = 1 << 20;
export const KINDS = [
    "hello",
    "episode_start",
    "observation",
    "action",
    "localize_request",
    "localize_response",
    "answer_request",
    "answer_response",
    "episode_end",
    "error",
];
export const EnvelopeSchema = z.object({
    seq: z.number().int(),
    session_id: z.string(),
    kind: z.enum(KINDS),
    payload: z.record(z.unknown()),
});
export const DialogTurnSchema = z.object({
    question: z.string(),
    answer: z.string(),
    turn_index: z.number().int(),
});
export const NodeCardSchema = z.object({
    id: z.string(),
    x: z.number(),
    y: z.number(),
    z: z.number(),
    room_type: z.string().nullable(),
    objects: z.array(z.string()),
    caption: z.string().nullable().optional(),
    image_ref: z.string().nullable().optional(),
});
export const ObservationSchema = z.object({
    current: NodeCardSchema,
    neighbors: z.array(NodeCardSchema),
    dialog: z.array(DialogTurnSchema),
    nav_steps_used: z.number().int(),
    dialog_turns_used: z.number().int(),
    guess_result: z.string().optional(),
});
export const RoomSummarySchema = z.object({
    room_id: z.string(),
    room_type: z.string(),
    floor: z.number().int(),
    objects: z.array(z.string()),
    distance_to_goal: z.number(),
});
export const HouseSummarySchema = z.object({
    floors: z.number().int(),
    rooms: z.number().int(),
    room_list: z.array(RoomSummarySchema),
});
export const PathStepSchema = z.object({
    id: z.string(),
    x: z.number(),
    y: z.number(),
    z: z.number(),
    room_type: z.string(),
    room_id: z.string(),
    floor: z.number().int(),
});
export const ShortestPathSchema = z.object({
    from_estimate: z.string(),
    path: z.array(PathStepSchema),
    length_m: z.number(),
});
export const NavigatorEpisodeStartSchema = z.object({
    episode_id: z.string(),
    scan_id: z.string(),
    instruction: z.string(),
    observation: ObservationSchema,
});
export const GuideEpisodeStartSchema = z.object({
    episode_id: z.string(),
    scan_id: z.string(),
    instruction: z.string(),
    goal: z.object({ nodes: z.array(z.string()), room: z.string().nullable() }),
    house_summary: HouseSummarySchema,
});
export const LocalizeRequestSchema = z.object({
    question: z.string(),
    dialog: z.array(DialogTurnSchema),
    house_summary: HouseSummarySchema,
});
export const AnswerRequestSchema = z.object({
    question: z.string(),
    estimate: z.string(),
    shortest_path: ShortestPathSchema,
});
export class ProtocolError extends Error {
    code;
    constructor(code, message) {
        super(`${code}: ${message}`);
        this.code = code;
    }
}
export function encodeEnvelope(env) {
    // Top-level keys in sorted order, matching the server's frame layout.
    const frame = JSON.stringify({
        kind: env.kind,
        payload: env.payload,
        seq: env.seq,
        session_id: env.session_id,
    }) + "\n";
    if (new TextEncoder().encode(frame).length > MAX_FRAME_BYTES) {
        throw new ProtocolError("oversized_frame", "frame exceeds 1 MiB");
    }
    return frame;
}
export function decodeEnvelope(frame) {
    if (frame.length > MAX_FRAME_BYTES) {
        throw new ProtocolError("oversized_frame", "frame exceeds 1 MiB");
    }
    let doc;
    try {
        doc = JSON.parse(frame);
    }
    catch (e) {
        throw new ProtocolError("malformed", String(e));
    }
    const parsed = EnvelopeSchema.safeParse(doc);
    if (!parsed.success) {
        const unknownKind = typeof doc === "object" &&
            doc !== null &&
            "kind" in doc &&
            !KINDS.includes(doc.kind);
        throw new ProtocolError(unknownKind ? "unknown_kind" : "malformed", parsed.error.message);
    }
    return parsed.data;
}
