/**
 * Browser entry point. Picks a role from the ?role= query parameter, opens
 * the WebSocket session, and renders the matching pane. All rendering is a
 * pure function of the pane state; gestures go through the reducer modules
 * so each accepted gesture emits exactly one protocol message.
 */
import { WebSocketTransport } from "./transport.js";
import { SessionClient } from "./session.js";
import * as nav from "./navigatorPane.js";
import * as gui from "./guidePane.js";
function el(id) {
    const node = document.getElementById(id);
    if (node === null)
        throw new Error(`missing element #${id}`);
    return node;
}
function esc(text) {
    const div = document.createElement("div");
    div.textContent = text;
    return div.innerHTML;
}
function chatHtml(lines) {
    return lines
        .map((l) => `<p class="chat-${l.speaker}"><b>${l.speaker}:</b> ${esc(l.text)}</p>`)
        .join("");
}
// ---------------------------------------------------------------- navigator
function renderNavigator(state) {
    el("phase").textContent = state.phase;
    el("instruction").textContent = state.instruction ?? "waiting for episode…";
    el("chat").innerHTML = chatHtml(state.chat);
    el("banner").textContent = state.disconnected
        ? "connection lost"
        : state.errorBanner ?? "";
    const obs = state.observation;
    const here = el("here");
    const moves = el("moves");
    if (obs === null) {
        here.textContent = "";
        moves.innerHTML = "";
    }
    else {
        const objects = obs.current.objects.join(", ") || "nothing notable";
        here.textContent =
            `You are in a ${obs.current.room_type ?? "room"}. You can see: ${objects}. ` +
                `Steps used: ${obs.nav_steps_used}. Questions used: ${obs.dialog_turns_used}.`;
        const locked = state.phase !== "ready";
        moves.innerHTML = obs.neighbors
            .map((n) => `<button class="move" data-node="${esc(n.id)}" ${locked ? "disabled" : ""}>` +
            `${esc(n.room_type ?? "?")} (${esc(n.objects.slice(0, 3).join(", ") || "empty")})</button>`)
            .join("");
    }
    // Breadcrumb of visited positions only — never the full house map.
    const trail = el("trail");
    if (state.visited.length > 0) {
        const xs = state.visited.map((v) => v.x);
        const ys = state.visited.map((v) => v.y);
        const pad = 1;
        const minX = Math.min(...xs) - pad;
        const minY = Math.min(...ys) - pad;
        const w = Math.max(...xs) - minX + pad;
        const h = Math.max(...ys) - minY + pad;
        trail.setAttribute("viewBox", `${minX} ${minY} ${w} ${h}`);
        const pts = state.visited.map((v) => `${v.x},${v.y}`).join(" ");
        const last = state.visited[state.visited.length - 1];
        trail.innerHTML =
            `<polyline points="${pts}" fill="none" stroke="#888" stroke-width="0.1"/>` +
                `<circle cx="${last.x}" cy="${last.y}" r="0.25" fill="#d33"/>`;
    }
    const popup = el("popup");
    if (state.popup === "wrong_guess") {
        popup.hidden = false;
        popup.innerHTML =
            `<p>That is not the goal room — keep exploring.</p>` +
                `<button id="popup-ok">Continue</button>`;
        el("popup-ok").onclick = () => update(dismiss());
    }
    else if (state.popup === "rating") {
        popup.hidden = false;
        const outcome = state.outcome ?? {};
        popup.innerHTML =
            `<p>Episode over (success: ${esc(String(outcome["success"] ?? "?"))}).</p>` +
                `<p>Rate your guide:</p>` +
                [1, 2, 3, 4, 5].map((i) => `<button class="rate" data-rate="${i}">${i}</button>`).join("") +
                `<p id="rated"></p>`;
        popup.querySelectorAll(".rate").forEach((b) => {
            b.onclick = () => {
                // The wire protocol has no rating kind; ratings stay client-side
                // for the operator to export from the console.
                window["partnerRating"] =
                    Number(b.dataset["rate"]);
                el("rated").textContent = `Recorded: ${b.dataset["rate"]}/5.`;
            };
        });
    }
    else {
        popup.hidden = true;
        popup.innerHTML = "";
    }
}
let navState = nav.initialNavigatorState();
let guideState = gui.initialGuideState();
let session;
function dismiss() {
    navState = nav.dismissPopup(navState);
    return navState;
}
function update(_) {
    if (session.role === "navigator")
        renderNavigator(navState);
    else
        renderGuide(guideState);
}
function applyNavGesture(result) {
    navState = result.state;
    if (result.action !== null)
        session.sendAction(result.action);
    renderNavigator(navState);
}
function bindNavigator() {
    el("moves").addEventListener("click", (ev) => {
        const target = ev.target;
        const node = target.dataset["node"];
        if (node !== undefined)
            applyNavGesture(nav.clickNeighbor(navState, node));
    });
    el("ask-form").addEventListener("submit", (ev) => {
        ev.preventDefault();
        const input = el("ask-input");
        const result = nav.sendQuestion(navState, input.value);
        if (result.action !== null)
            input.value = "";
        applyNavGesture(result);
    });
    el("guess-btn").onclick = () => applyNavGesture(nav.pressGuess(navState));
    el("stop-btn").onclick = () => applyNavGesture(nav.pressStop(navState));
}
// -------------------------------------------------------------------- guide
function renderGuide(state) {
    el("phase").textContent = state.phase;
    el("instruction").textContent = state.start?.instruction ?? "waiting for episode…";
    el("chat").innerHTML = chatHtml(state.chat);
    el("banner").textContent = state.disconnected
        ? "connection lost"
        : state.errorBanner ?? "";
    el("goal").textContent =
        state.start !== null
            ? `Goal room: ${state.start.goal.room ?? "unknown"} ` +
                `(nodes ${state.start.goal.nodes.join(", ")})`
            : "";
    el("rooms").innerHTML = gui
        .roomsByDistanceToGoal(state)
        .map((r) => `<li data-room="${esc(r.id)}" class="${r.id === state.focusRoom ? "focused" : ""}">` +
        `${esc(r.type)} — ${Number.isFinite(r.distance) ? r.distance.toFixed(1) + " m" : "?"}</li>`)
        .join("");
    // House map: the full graph from static assets. The navigator's true
    // position is unknown here by construction — only the guide's own
    // estimate is ever marked.
    const map = el("map");
    const g = state.graph;
    if (g !== null && g.nodes.length > 0) {
        const xs = g.nodes.map((n) => n.x);
        const ys = g.nodes.map((n) => n.y);
        const pad = 1;
        const minX = Math.min(...xs) - pad;
        const minY = Math.min(...ys) - pad;
        map.setAttribute("viewBox", `${minX} ${minY} ${Math.max(...xs) - minX + pad} ${Math.max(...ys) - minY + pad}`);
        const pos = new Map(g.nodes.map((n) => [n.id, n]));
        const edges = g.edges
            .map((e) => {
            const a = pos.get(e.a);
            const b = pos.get(e.b);
            if (a === undefined || b === undefined)
                return "";
            return `<line x1="${a.x}" y1="${a.y}" x2="${b.x}" y2="${b.y}" stroke="#bbb" stroke-width="0.05"/>`;
        })
            .join("");
        const pathIds = new Set((state.shortestPath?.path ?? []).map((s) => s.id));
        const nodes = g.nodes
            .map((n) => {
            const cls = n.id === state.selectedNode
                ? "estimate"
                : pathIds.has(n.id)
                    ? "onpath"
                    : n.room_id === state.focusRoom
                        ? "focused"
                        : "plain";
            return `<circle class="gnode ${cls}" data-node="${esc(n.id)}" cx="${n.x}" cy="${n.y}" r="0.2"/>`;
        })
            .join("");
        map.innerHTML = edges + nodes;
    }
    el("question").textContent = state.pendingQuestion ?? "";
    el("estimate-btn").disabled =
        state.phase !== "localizing" || state.selectedNode === null;
    el("answer-form").hidden = state.phase !== "answering";
    el("path-panel").textContent =
        state.shortestPath !== null
            ? `From your estimate: ${state.shortestPath.path
                .map((s) => s.room_type)
                .join(" → ")} (${state.shortestPath.length_m.toFixed(1)} m)`
            : "";
    const popup = el("popup");
    if (state.phase === "ended") {
        popup.hidden = false;
        popup.innerHTML =
            `<p>Episode over (success: ${esc(String(state.outcome?.["success"] ?? "?"))}).</p>` +
                `<p>Rate your navigator:</p>` +
                [1, 2, 3, 4, 5].map((i) => `<button class="rate" data-rate="${i}">${i}</button>`).join("");
        popup.querySelectorAll(".rate").forEach((b) => {
            b.onclick = () => {
                window["partnerRating"] =
                    Number(b.dataset["rate"]);
            };
        });
    }
    else {
        popup.hidden = true;
    }
}
function applyGuideGesture(result) {
    guideState = result.state;
    if (result.response !== null) {
        session.send(result.response.kind, result.response.payload);
    }
    renderGuide(guideState);
}
async function loadGraph(scanId) {
    const res = await fetch(`/graphs/${scanId}.json`);
    if (!res.ok)
        return;
    guideState = gui.attachGraph(guideState, await res.json());
    renderGuide(guideState);
}
function bindGuide() {
    el("rooms").addEventListener("click", (ev) => {
        const room = ev.target.dataset["room"];
        if (room !== undefined) {
            guideState = gui.focusRoom(guideState, room);
            renderGuide(guideState);
        }
    });
    el("map").addEventListener("click", (ev) => {
        const node = ev.target.dataset?.["node"];
        if (node !== undefined) {
            guideState = gui.selectNode(guideState, node);
            renderGuide(guideState);
        }
    });
    el("estimate-btn").onclick = () => applyGuideGesture(gui.submitEstimate(guideState));
    el("answer-form").addEventListener("submit", (ev) => {
        ev.preventDefault();
        const input = el("answer-input");
        const result = gui.submitAnswer(guideState, input.value);
        if (result.response !== null)
            input.value = "";
        applyGuideGesture(result);
    });
}
// --------------------------------------------------------------------- boot
export function boot() {
    const params = new URLSearchParams(window.location.search);
    const role = (params.get("role") ?? "navigator");
    const scheme = window.location.protocol === "https:" ? "wss" : "ws";
    const socket = new WebSocket(`${scheme}://${window.location.host}/session`);
    const transport = new WebSocketTransport(socket);
    const onEnvelope = (env) => {
        if (role === "navigator") {
            navState = nav.reduceNavigator(navState, env);
            renderNavigator(navState);
        }
        else {
            guideState = gui.reduceGuide(guideState, env);
            if (env.kind === "episode_start" && guideState.graph === null) {
                void loadGraph(String(env.payload["scan_id"] ?? ""));
            }
            renderGuide(guideState);
        }
    };
    socket.onopen = () => {
        session = new SessionClient(transport, role, {
            onEnvelope,
            onClose: () => {
                if (role === "navigator") {
                    navState = nav.markDisconnected(navState);
                    renderNavigator(navState);
                }
                else {
                    guideState = gui.markDisconnected(guideState);
                    renderGuide(guideState);
                }
            },
        });
    };
    document.body.dataset["role"] = role;
    if (role === "navigator")
        bindNavigator();
    else
        bindGuide();
}
boot();
