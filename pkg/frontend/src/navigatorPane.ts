/**
 * Navigator pane state machine. The navigator sees only its local
 * neighborhood and the dialog: no goal region, no full house map. Movement
 * and asking lock while a question is in flight ("awaiting the guide") and
 * unlock when the answer lands in the next observation.
 */

import {
  ActionPayload,
  Envelope,
  NavigatorEpisodeStartSchema,
  Observation,
  ObservationSchema,
} from "./protocol.js";

export type NavigatorPhase =
  | "connecting"
  | "ready"
  | "awaiting_guide"
  | "ended";

export interface ChatLine {
  speaker: "navigator" | "guide";
  text: string;
}

export interface VisitedMark {
  id: string;
  x: number;
  y: number;
  z: number;
}

export interface NavigatorState {
  phase: NavigatorPhase;
  episodeId: string | null;
  /** the hint text, e.g. "The goal room contains a bed." */
  instruction: string | null;
  observation: Observation | null;
  chat: ChatLine[];
  /** nodes this navigator has actually stood on, in visit order */
  visited: VisitedMark[];
  popup: "wrong_guess" | "rating" | null;
  outcome: Record<string, unknown> | null;
  errorBanner: string | null;
  /** set when the socket drops; the pane renders a reconnect banner */
  disconnected: boolean;
}

export function initialNavigatorState(): NavigatorState {
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

function markVisited(state: NavigatorState, obs: Observation): VisitedMark[] {
  const { id, x, y, z } = obs.current;
  const last = state.visited[state.visited.length - 1];
  if (last !== undefined && last.id === id) return state.visited;
  return [...state.visited, { id, x, y, z }];
}

function chatFromDialog(obs: Observation): ChatLine[] {
  const lines: ChatLine[] = [];
  for (const turn of obs.dialog) {
    lines.push({ speaker: "navigator", text: turn.question });
    lines.push({ speaker: "guide", text: turn.answer });
  }
  return lines;
}

export function reduceNavigator(
  state: NavigatorState,
  env: Envelope,
): NavigatorState {
  switch (env.kind) {
    case "hello":
      return { ...state, phase: "connecting" };
    case "episode_start": {
      const start = NavigatorEpisodeStartSchema.parse(env.payload);
      const base = { ...initialNavigatorState(), phase: "ready" as const };
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
        outcome: (env.payload["outcome"] as Record<string, unknown>) ?? null,
        popup: "rating",
      };
    case "error":
      return { ...state, errorBanner: String(env.payload["message"] ?? "error") };
    default:
      return state;
  }
}

export interface GestureResult {
  state: NavigatorState;
  /** exactly one protocol message per accepted gesture */
  action: ActionPayload | null;
}

function rejected(state: NavigatorState): GestureResult {
  return { state, action: null };
}

export function clickNeighbor(state: NavigatorState, nodeId: string): GestureResult {
  if (state.phase !== "ready" || state.observation === null) return rejected(state);
  if (!state.observation.neighbors.some((n) => n.id === nodeId)) {
    return rejected(state);
  }
  return { state, action: { type: "move", node: nodeId } };
}

export function sendQuestion(state: NavigatorState, text: string): GestureResult {
  if (state.phase !== "ready" || text.trim().length === 0) return rejected(state);
  return {
    state: { ...state, phase: "awaiting_guide" },
    action: { type: "ask", text },
  };
}

export function pressGuess(state: NavigatorState): GestureResult {
  if (state.phase !== "ready") return rejected(state);
  return { state, action: { type: "guess" } };
}

export function pressStop(state: NavigatorState): GestureResult {
  if (state.phase !== "ready") return rejected(state);
  return { state, action: { type: "stop" } };
}

export function dismissPopup(state: NavigatorState): NavigatorState {
  return { ...state, popup: state.phase === "ended" ? state.popup : null };
}

export function markDisconnected(state: NavigatorState): NavigatorState {
  return state.phase === "ended" ? state : { ...state, disconnected: true };
}
