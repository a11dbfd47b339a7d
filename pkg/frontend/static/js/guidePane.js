/**
 * Guide pane state machine. The guide is remote: it knows the house layout,
 * the goal, and the dialog, but never the navigator's true position or
 * trajectory. Browsing is free-form over a graph document fetched from the
 * server's static assets; the wire protocol itself never carries node lists.
 */
import { z } from "zod";
import { GuideEpisodeStartSchema, LocalizeRequestSchema, AnswerRequestSchema, } from "./protocol.js";
export const GraphNodeSchema = z.object({
    id: z.string(),
    x: z.number(),
    y: z.number(),
    z: z.number(),
    room_id: z.string(),
    objects: z.array(z.string()).default([]),
    caption: z.string().nullable().optional(),
});
export const GraphRoomSchema = z.object({
    room_id: z.string(),
    room_type: z.string(),
    floor: z.number().int(),
    objects: z.array(z.string()).default([]),
});
export const GraphEdgeSchema = z.object({
    a: z.string(),
    b: z.string(),
    length: z.number().optional(),
});
export const GraphDocSchema = z.object({
    scan_id: z.string(),
    rooms: z.array(GraphRoomSchema),
    nodes: z.array(GraphNodeSchema),
    edges: z.array(GraphEdgeSchema),
});
export function initialGuideState() {
    return {
        phase: "connecting",
        episodeId: null,
        start: null,
        graph: null,
        chat: [],
        pendingQuestion: null,
        selectedNode: null,
        shortestPath: null,
        focusRoom: null,
        outcome: null,
        errorBanner: null,
        disconnected: false,
    };
}
export function reduceGuide(state, env) {
    switch (env.kind) {
        case "hello":
            return { ...state, phase: "connecting" };
        case "episode_start": {
            const start = GuideEpisodeStartSchema.parse(env.payload);
            return {
                ...initialGuideState(),
                phase: "browsing",
                episodeId: start.episode_id,
                start,
                graph: state.graph,
                focusRoom: start.goal.room,
            };
        }
        case "localize_request": {
            const req = LocalizeRequestSchema.parse(env.payload);
            return {
                ...state,
                phase: "localizing",
                pendingQuestion: req.question,
                selectedNode: null,
                chat: [...state.chat, { speaker: "navigator", text: req.question }],
            };
        }
        case "answer_request": {
            const req = AnswerRequestSchema.parse(env.payload);
            return {
                ...state,
                phase: "answering",
                pendingQuestion: req.question,
                shortestPath: req.shortest_path,
            };
        }
        case "episode_end":
            return {
                ...state,
                phase: "ended",
                pendingQuestion: null,
                outcome: env.payload["outcome"] ?? null,
            };
        case "error":
            return { ...state, errorBanner: String(env.payload["message"] ?? "error") };
        default:
            return state;
    }
}
export function attachGraph(state, doc) {
    return { ...state, graph: GraphDocSchema.parse(doc) };
}
export function focusRoom(state, roomId) {
    if (state.graph !== null && !state.graph.rooms.some((r) => r.room_id === roomId)) {
        return state;
    }
    return { ...state, focusRoom: roomId };
}
export function selectNode(state, nodeId) {
    if (state.phase !== "localizing")
        return state;
    if (state.graph !== null && !state.graph.nodes.some((n) => n.id === nodeId)) {
        return state;
    }
    return { ...state, selectedNode: nodeId };
}
export function submitEstimate(state) {
    if (state.phase !== "localizing" || state.selectedNode === null) {
        return { state, response: null };
    }
    return {
        // Stay locked until the server follows up with the answer request.
        state: { ...state, phase: "answering", shortestPath: null },
        response: { kind: "localize_response", payload: { node: state.selectedNode } },
    };
}
export function submitAnswer(state, text) {
    if (state.phase !== "answering" || text.trim().length === 0) {
        return { state, response: null };
    }
    return {
        state: {
            ...state,
            phase: "browsing",
            pendingQuestion: null,
            chat: [...state.chat, { speaker: "guide", text }],
        },
        response: { kind: "answer_response", payload: { text } },
    };
}
export function markDisconnected(state) {
    return state.phase === "ended" ? state : { ...state, disconnected: true };
}
/** Rooms sorted by geodesic-ish proximity to the goal room centroid (straight
 * line over node coordinates); the panel lists these for quick orientation. */
export function roomsByDistanceToGoal(state) {
    const graph = state.graph;
    const goalRoom = state.start?.goal.room ?? null;
    if (graph === null)
        return [];
    const centroid = (roomId) => {
        const members = graph.nodes.filter((n) => n.room_id === roomId);
        if (members.length === 0)
            return null;
        const sum = members.reduce((acc, n) => [acc[0] + n.x, acc[1] + n.y, acc[2] + n.z], [0, 0, 0]);
        return [sum[0] / members.length, sum[1] / members.length, sum[2] / members.length];
    };
    const goal = goalRoom !== null ? centroid(goalRoom) : null;
    const rows = graph.rooms.map((room) => {
        const c = centroid(room.room_id);
        const distance = goal !== null && c !== null
            ? Math.hypot(c[0] - goal[0], c[1] - goal[1], c[2] - goal[2])
            : Number.POSITIVE_INFINITY;
        return { id: room.room_id, type: room.room_type, distance };
    });
    rows.sort((a, b) => a.distance - b.distance || a.id.localeCompare(b.id));
    return rows;
}
