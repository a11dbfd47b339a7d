/**
 * Navigator pane state machine. The navigator sees only its local
 * neighborhood and the dialog: no goal region, no full house map. Movement
 * and asking lock while a question is in flight ("awaiting the guide") and
 * unlock when the answer lands in the next observation.
 */
import { NavigatorEpisodeStartSchema, ObservationSchema, } from "./protocol.js";
export function initialNavigatorState() {
    return {
        phase: "connecting",
        episodeId: null,
        instruction: null,
        observation: null,
        chat: [],
        visited: [],
        popup: null,
        outcome: null,
        errorBanner: null,
        disconnected: false,
    };
}
function markVisited(state, obs) {
    const { id, x, y, z } = obs.current;
    const last = state.visited[state.visited.length - 1];
    if (last !== undefined && last.id === id)
        return state.visited;
    return [...state.visited, { id, x, y, z }];
}
function chatFromDialog(obs) {
    const lines = [];
    for (const turn of obs.dialog) {
        lines.push({ speaker: "navigator", text: turn.question });
        lines.push({ speaker: "guide", text: turn.answer });
    }
    return lines;
}
export function reduceNavigator(state, env) {
    switch (env.kind) {
        case "hello":
            return { ...state, phase: "connecting" };
        case "episode_start": {
            const start = NavigatorEpisodeStartSchema.parse(env.payload);
            const base = { ...initialNavigatorState(), phase: "ready" };
            return {
                ...base,
                episodeId: start.episode_id,
                instruction: start.instruction,
                observation: start.observation,
                visited: markVisited(base, start.observation),
                chat: chatFromDialog(start.observation),
            };
        }
        case "observation": {
            const obs = ObservationSchema.parse(env.payload);
            return {
                ...state,
                phase: "ready",
                observation: obs,
                visited: markVisited(state, obs),
                chat: chatFromDialog(obs),
                // A wrong guess comes back as a normal observation tagged by the
                // server; the episode continues behind the popup.
                popup: obs.guess_result === "incorrect" ? "wrong_guess" : state.popup,
                errorBanner: null,
            };
        }
        case "episode_end":
            return {
                ...state,
                phase: "ended",
                outcome: env.payload["outcome"] ?? null,
                popup: "rating",
            };
        case "error":
            return { ...state, errorBanner: String(env.payload["message"] ?? "error") };
        default:
            return state;
    }
}
function rejected(state) {
    return { state, action: null };
}
export function clickNeighbor(state, nodeId) {
    if (state.phase !== "ready" || state.observation === null)
        return rejected(state);
    if (!state.observation.neighbors.some((n) => n.id === nodeId)) {
        return rejected(state);
    }
    return { state, action: { type: "move", node: nodeId } };
}
export function sendQuestion(state, text) {
    if (state.phase !== "ready" || text.trim().length === 0)
        return rejected(state);
    return {
        state: { ...state, phase: "awaiting_guide" },
        action: { type: "ask", text },
    };
}
export function pressGuess(state) {
    if (state.phase !== "ready")
        return rejected(state);
    return { state, action: { type: "guess" } };
}
export function pressStop(state) {
    if (state.phase !== "ready")
        return rejected(state);
    return { state, action: { type: "stop" } };
}
export function dismissPopup(state) {
    return { ...state, popup: state.phase === "ended" ? state.popup : null };
}
export function markDisconnected(state) {
    return state.phase === "ended" ? state : { ...state, disconnected: true };
}
