"""Wire protocol and server for remote Navigator/Guide agents.

Transport is newline-delimited UTF-8 JSON envelopes (seq, session_id, kind,
payload), one message per line, max frame 1 MiB. The identical envelope
schema rides over a browser WebSocket (one envelope per text frame) so the
web UI speaks the same protocol. Blank lines are keepalives and are ignored.

The guide side never receives the Navigator's position or trajectory: its
messages are built solely from the graph, the goal, the instruction, the
dialog, and the guide's own estimates. The server, not the guide client,
computes the shortest-path payload from the guide's estimate, keeping graph
truth server-side.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import engine as eng
from .engine import EngineConfig, EpisodeTask, Phase
from .env_graph import EnvironmentGraph, GoalRegion, HouseSummary, NodeId
from .metrics import score_episode, report_to_record

MAX_FRAME_BYTES = 1 << 20
HEARTBEAT_SECONDS = 30.0
DEFAULT_TURN_TIMEOUT = 120.0

KINDS = frozenset({
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
})

ROLES = ("navigator", "guide", "observer")


class ProtocolError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass(frozen=True)
class Envelope:
    seq: int
    session_id: str
    kind: str
    payload: dict


def encode(envelope: Envelope) -> bytes:
    """Envelope -> one newline-terminated UTF-8 JSON frame."""
    if envelope.kind not in KINDS:
        raise ProtocolError("unknown_kind", f"cannot encode kind {envelope.kind!r}")
    frame = (
        json.dumps(
            {
                "seq": envelope.seq,
                "session_id": envelope.session_id,
                "kind": envelope.kind,
                "payload": envelope.payload,
            },
            sort_keys=True,
        ).encode("utf-8")
        + b"\n"
    )
    if len(frame) > MAX_FRAME_BYTES:
        raise ProtocolError("oversized_frame", f"{len(frame)} bytes exceeds 1 MiB")
    return frame


def decode(frame: bytes) -> Envelope:
    """One frame -> Envelope; unknown payload fields pass through opaquely."""
    if len(frame) > MAX_FRAME_BYTES:
        raise ProtocolError("oversized_frame", f"{len(frame)} bytes exceeds 1 MiB")
    try:
        doc = json.loads(frame.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError("malformed", str(exc)) from exc
    if not isinstance(doc, dict):
        raise ProtocolError("malformed", "frame must be a JSON object")
    for key in ("seq", "session_id", "kind", "payload"):
        if key not in doc:
            raise ProtocolError("malformed", f"missing field {key!r}")
    if not isinstance(doc["seq"], int):
        raise ProtocolError("malformed", "seq must be an integer")
    if doc["kind"] not in KINDS:
        raise ProtocolError("unknown_kind", f"unknown kind {doc['kind']!r}")
    if not isinstance(doc["payload"], dict):
        raise ProtocolError("malformed", "payload must be an object")
    return Envelope(doc["seq"], doc["session_id"], doc["kind"], doc["payload"])


# ------------------------------------------------------------------ payloads


def observation_payload(graph: EnvironmentGraph, state) -> dict:
    """What the Navigator may see: the local neighborhood and the dialog."""
    ann = graph.annotation(state.current_node)
    room = graph.rooms.get(ann.room_id)
    neighbors = []
    for n in graph.neighbors(state.current_node):
        p = graph.position(n)
        nann = graph.annotation(n)
        nroom = graph.rooms.get(nann.room_id)
        neighbors.append({
            "id": n,
            "x": p.x, "y": p.y, "z": p.z,
            "room_type": nroom.room_type if nroom else None,
            "objects": list(nann.objects),
            "caption": nann.caption,
        })
    p = graph.position(state.current_node)
    return {
        "current": {
            "id": state.current_node,
            "x": p.x, "y": p.y, "z": p.z,
            "room_type": room.room_type if room else None,
            "objects": list(ann.objects),
            "caption": ann.caption,
            "image_ref": ann.image_ref,
        },
        "neighbors": neighbors,
        "dialog": [
            {"question": t.question, "answer": t.answer, "turn_index": t.turn_index}
            for t in state.dialog
        ],
        "nav_steps_used": state.nav_steps_used,
        "dialog_turns_used": state.dialog_turns_used,
    }


def house_summary_payload(summary: HouseSummary) -> dict:
    return {
        "floors": summary.floor_count,
        "rooms": summary.room_count,
        "room_list": [
            {
                "room_id": r.room_id,
                "room_type": r.room_type,
                "floor": r.floor,
                "objects": list(r.objects),
                "distance_to_goal": r.distance_to_goal,
            }
            for r in summary.rooms
        ],
    }


def shortest_path_payload(graph: EnvironmentGraph, estimate: NodeId, goal: GoalRegion) -> dict:
    """Path from the guide's estimate to the goal: nodes, rooms, floors."""
    path = graph.shortest_path_to_region(estimate, goal)
    steps = []
    for n in path:
        p = graph.position(n)
        room = graph.room_of(n)
        steps.append({
            "id": n,
            "x": p.x, "y": p.y, "z": p.z,
            "room_type": room.room_type,
            "room_id": room.room_id,
            "floor": room.floor,
        })
    return {"from_estimate": estimate, "path": steps, "length_m": graph.path_length(path)}


def dialog_payload(state) -> list[dict]:
    # The guide-side dialog view: questions and answers only; a turn's true
    # node is never serialized toward the guide.
    return [
        {"question": t.question, "answer": t.answer, "turn_index": t.turn_index}
        for t in state.dialog
    ]


# -------------------------------------------------------------------- server


@dataclass
class ServeConfig:
    host: str = "127.0.0.1"
    port: int = 8750
    engine: EngineConfig = field(default_factory=EngineConfig)
    turn_timeout: float = DEFAULT_TURN_TIMEOUT
    max_episodes: Optional[int] = None  # stop after N episodes (None = serve forever)
    event_log_dir: Optional[str] = None  # write one .events file per episode


class Transport:
    """One connected peer, over TCP stream or WebSocket."""

    async def send_frame(self, frame: bytes) -> None:
        raise NotImplementedError

    async def recv_frame(self) -> Optional[bytes]:
        raise NotImplementedError

    async def close(self) -> None:
        raise NotImplementedError


class StreamTransport(Transport):
    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.reader = reader
        self.writer = writer

    async def send_frame(self, frame: bytes) -> None:
        self.writer.write(frame)
        await self.writer.drain()

    async def recv_frame(self) -> Optional[bytes]:
        while True:
            try:
                line = await self.reader.readline()
            except (ConnectionResetError, asyncio.LimitOverrunError):
                return None
            if not line:
                return None
            if not line.strip():
                continue  # keepalive
            return line

    async def close(self) -> None:
        try:
            self.writer.close()
            await self.writer.wait_closed()
        except (ConnectionResetError, BrokenPipeError):
            pass


class WebSocketTransport(Transport):
    """One envelope per text frame; same schema as the stream transport."""

    def __init__(self, websocket):
        self.websocket = websocket

    async def send_frame(self, frame: bytes) -> None:
        await self.websocket.send(frame.decode("utf-8"))

    async def recv_frame(self) -> Optional[bytes]:
        import websockets

        while True:
            try:
                message = await self.websocket.recv()
            except websockets.ConnectionClosed:
                return None
            if isinstance(message, str):
                message = message.encode("utf-8")
            if not message.strip():
                continue
            return message

    async def close(self) -> None:
        await self.websocket.close()


class Session:
    def __init__(self, session_id: str, role: str, transport: Transport):
        self.session_id = session_id
        self.role = role
        self.transport = transport
        self.out_seq = 0
        self.in_seq = -1
        self.transcript: list[bytes] = []  # outbound frames, for audits
        self.closed = False

    async def send(self, kind: str, payload: dict) -> None:
        env = Envelope(self.out_seq, self.session_id, kind, payload)
        frame = encode(env)
        self.out_seq += 1
        self.transcript.append(frame)
        if not self.closed:
            try:
                await self.transport.send_frame(frame)
            except (ConnectionResetError, BrokenPipeError):
                self.closed = True

    async def send_error(self, code: str, message: str) -> None:
        await self.send("error", {"code": code, "message": message})

    async def recv(self, timeout: Optional[float] = None) -> Envelope:
        """Next well-formed envelope; malformed frames get an error reply and
        are skipped without killing the session."""
        while True:
            frame = await asyncio.wait_for(self.transport.recv_frame(), timeout)
            if frame is None:
                raise ConnectionError(f"session {self.session_id} disconnected")
            try:
                env = decode(frame)
            except ProtocolError as exc:
                await self.send_error(exc.code, exc.message)
                continue
            if env.seq != self.in_seq + 1:
                await self.send_error(
                    "bad_seq", f"expected seq {self.in_seq + 1}, got {env.seq}"
                )
                continue
            self.in_seq = env.seq
            return env


class EpisodeAborted(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class DialNavServer:
    """Pairs one navigator and one guide per episode and relays the engine
    loop as protocol messages. Distinct episodes run concurrently; all
    mutations to one episode stay inside its own coroutine."""

    def __init__(self, config: ServeConfig, tasks: Sequence[EpisodeTask]):
        if not tasks:
            raise ValueError("server needs at least one episode task")
        self.config = config
        self.tasks = list(tasks)
        self._task_index = 0
        self._role_counters = {r: 0 for r in ROLES}
        self._waiting: dict[str, asyncio.Queue] = {
            "navigator": asyncio.Queue(),
            "guide": asyncio.Queue(),
        }
        self._observers: list[Session] = []
        self._episode_jobs: set[asyncio.Task] = set()
        self._server: Optional[asyncio.AbstractServer] = None
        self._ws_server = None
        self.episodes_done = 0
        self.completed: list[dict] = []  # episode_end records, in finish order
        self.event_logs: dict[str, str] = {}
        self.sessions: list[Session] = []
        self.all_done = asyncio.Event()

    # -- lifecycle

    async def start(self) -> None:
        self._server = await asyncio.start_server(
            self._handle_stream,
            self.config.host,
            self.config.port,
            limit=MAX_FRAME_BYTES * 2,
        )

    @property
    def port(self) -> int:
        return self._server.sockets[0].getsockname()[1]

    async def serve_websocket(self, port: int, static_dir=None) -> None:
        """Browser transport on ws://host:port/session; other HTTP paths
        serve static assets from static_dir when provided."""
        import websockets
        from websockets.asyncio.server import serve

        async def handler(websocket):
            await self._handle_transport(WebSocketTransport(websocket))
            # Returning closes the socket in websockets; hold it open until
            # the peer hangs up.
            await websocket.wait_closed()

        def process_request(connection, request):
            if request.path == "/session":
                return None  # proceed with the WebSocket upgrade
            return _static_response(connection, request, static_dir)

        self._ws_server = await serve(
            handler,
            self.config.host,
            port,
            process_request=process_request,
            max_size=MAX_FRAME_BYTES,
        )

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()
        for job in list(self._episode_jobs):
            job.cancel()

    async def _handle_stream(self, reader, writer) -> None:
        await self._handle_transport(StreamTransport(reader, writer))

    # -- attach & pairing

    async def _handle_transport(self, transport: Transport) -> None:
        session = await self._attach(transport)
        if session is None:
            await transport.close()
            return
        if session.role == "observer":
            self._observers.append(session)
            return
        await self._waiting[session.role].put(session)
        await self._maybe_pair()

    async def _attach(self, transport: Transport) -> Optional[Session]:
        probe = Session("", "?", transport)
        try:
            env = await probe.recv(self.config.turn_timeout)
        except (ConnectionError, asyncio.TimeoutError):
            return None
        if env.kind != "hello":
            await probe.send_error("expected_hello", "first message must be hello")
            return None
        role = env.payload.get("role")
        if role not in ROLES:
            await probe.send_error("bad_role", f"role must be one of {ROLES}")
            return None
        self._role_counters[role] += 1
        session = Session(f"{role}-{self._role_counters[role]}", role, transport)
        session.in_seq = probe.in_seq
        session.out_seq = probe.out_seq
        session.transcript = probe.transcript
        await session.send("hello", {"role": role, "session_id": session.session_id})
        self.sessions.append(session)
        return session

    async def _maybe_pair(self) -> None:
        while (
            not self._waiting["navigator"].empty()
            and not self._waiting["guide"].empty()
            and self._more_tasks()
        ):
            nav = await self._waiting["navigator"].get()
            gui = await self._waiting["guide"].get()
            task = self.tasks[self._task_index % len(self.tasks)]
            self._task_index += 1
            job = asyncio.create_task(self._run_episode(task, nav, gui))
            self._episode_jobs.add(job)
            job.add_done_callback(self._episode_jobs.discard)

    def _more_tasks(self) -> bool:
        limit = self.config.max_episodes
        return limit is None or self._task_index < limit

    # -- the episode loop

    async def _run_episode(self, task: EpisodeTask, nav: Session, gui: Session) -> None:
        graph = task.graph
        state = eng.start_episode(task, self.config.engine)
        summary = house_summary_payload(graph.house_summary(task.goal))
        await nav.send("episode_start", {
            "episode_id": task.episode_id,
            "scan_id": graph.scan_id,
            "instruction": task.instruction,
            "observation": observation_payload(graph, state),
        })
        await gui.send("episode_start", {
            "episode_id": task.episode_id,
            "scan_id": graph.scan_id,
            "instruction": task.instruction,
            "goal": {"nodes": sorted(task.goal.node_ids),
                     "room": task.goal.region_room_id},
            "house_summary": summary,
        })
        try:
            while state.phase is not Phase.TERMINAL:
                state = await self._navigator_turn(task, state, nav, gui, summary)
        except EpisodeAborted as aborted:
            state = eng.abort(state, aborted.reason)
        outcome = eng.finalize(state)
        report = score_episode(outcome, graph)
        record = report_to_record(report)
        record["tags"] = list(outcome.tags)
        self.event_logs[task.episode_id] = eng.serialize_event_log(state.event_log)
        if self.config.event_log_dir is not None:
            from pathlib import Path

            log_dir = Path(self.config.event_log_dir)
            log_dir.mkdir(parents=True, exist_ok=True)
            (log_dir / f"{task.episode_id}.events").write_text(
                self.event_logs[task.episode_id]
            )
        await nav.send("episode_end", {
            "episode_id": task.episode_id,
            "outcome": record,
        })
        # The guide-side end message carries no trajectory-derived values:
        # the guide transcript must stay independent of the true trajectory.
        await gui.send("episode_end", {
            "episode_id": task.episode_id,
            "dialog_turns": outcome.dialog_turns,
            "aborted": list(outcome.tags),
        })
        self.completed.append(record)
        self.episodes_done += 1
        if self.config.max_episodes is not None and (
            self.episodes_done >= self.config.max_episodes
        ):
            self.all_done.set()

    async def _navigator_turn(
        self, task: EpisodeTask, state, nav: Session, gui: Session, summary: dict
    ):
        graph = task.graph
        env = await self._recv_or_abort(nav, "navigator")
        if env.kind != "action":
            await nav.send_error("unexpected_kind", f"expected action, got {env.kind}")
            return state
        a = env.payload
        kind = a.get("type")
        try:
            if kind == "move":
                state = eng.navigator_step(state, eng.Move(str(a.get("node"))))
            elif kind == "ask":
                state = eng.navigator_step(state, eng.Ask(a.get("text", "")))
            elif kind == "stop":
                state = eng.navigator_step(state, eng.Stop())
            elif kind == "guess":
                state = eng.navigator_step(state, eng.Guess())
                if state.phase is not Phase.TERMINAL:
                    await nav.send("observation", {
                        **observation_payload(graph, state),
                        "guess_result": "incorrect",
                    })
                return state
            else:
                await nav.send_error("bad_action", f"unknown action type {kind!r}")
                return state
        except eng.EngineError as exc:
            await nav.send_error("invalid_action", str(exc))
            return state

        if kind == "ask" and state.phase is Phase.AWAIT_LOCALIZATION:
            state = await self._guide_exchange(task, state, gui, summary)
        if state.phase is not Phase.TERMINAL:
            await nav.send("observation", observation_payload(graph, state))
        return state

    async def _guide_exchange(self, task: EpisodeTask, state, gui: Session, summary: dict):
        graph = task.graph
        question = state.pending_question or ""
        await gui.send("localize_request", {
            "question": question,
            "dialog": dialog_payload(state),
            "house_summary": summary,
        })
        while True:
            env = await self._recv_or_abort(gui, "guide")
            if env.kind != "localize_response":
                await gui.send_error(
                    "unexpected_kind", f"expected localize_response, got {env.kind}"
                )
                continue
            estimate = str(env.payload.get("node"))
            try:
                state = eng.guide_localize(state, estimate)
                break
            except eng.EngineError as exc:
                await gui.send_error("invalid_estimate", str(exc))
        await gui.send("answer_request", {
            "question": question,
            "estimate": estimate,
            "shortest_path": shortest_path_payload(graph, estimate, task.goal),
        })
        while True:
            env = await self._recv_or_abort(gui, "guide")
            if env.kind != "answer_response":
                await gui.send_error(
                    "unexpected_kind", f"expected answer_response, got {env.kind}"
                )
                continue
            try:
                state = eng.guide_answer(state, env.payload.get("text", ""))
                return state
            except eng.EngineError as exc:
                await gui.send_error("invalid_answer", str(exc))

    async def _recv_or_abort(self, session: Session, who: str) -> Envelope:
        try:
            return await session.recv(self.config.turn_timeout)
        except asyncio.TimeoutError:
            raise EpisodeAborted("disconnect") from None
        except ConnectionError:
            raise EpisodeAborted("disconnect") from None


def _static_response(connection, request, static_dir):
    """Minimal static file serving for the web UI assets."""
    import http
    from pathlib import Path

    if static_dir is None:
        return connection.respond(http.HTTPStatus.NOT_FOUND, "not found\n")
    rel = request.path.lstrip("/") or "index.html"
    target = (Path(static_dir) / rel).resolve()
    root = Path(static_dir).resolve()
    if root not in target.parents and target != root:
        return connection.respond(http.HTTPStatus.FORBIDDEN, "forbidden\n")
    if target.is_dir():
        target = target / "index.html"
    if not target.is_file():
        return connection.respond(http.HTTPStatus.NOT_FOUND, "not found\n")
    types = {".html": "text/html", ".js": "text/javascript", ".css": "text/css",
             ".map": "application/json", ".json": "application/json"}
    response = connection.respond(http.HTTPStatus.OK, "")
    response.headers["Content-Type"] = types.get(target.suffix, "application/octet-stream")
    response.body = target.read_bytes()
    del response.headers["Content-Length"]
    response.headers["Content-Length"] = str(len(response.body))
    return response
