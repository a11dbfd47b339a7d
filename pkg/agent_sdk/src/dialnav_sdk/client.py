"""Synchronous message-loop client.

One session per connection: say hello, then dispatch server messages to
user callbacks in wire order until episode_end or disconnect. The client
performs no reordering and holds no game truth; callbacks see exactly the
payloads the server sent.
"""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass, field
from typing import Callable, Optional

MAX_FRAME_BYTES = 1 << 20


class ProtocolViolation(RuntimeError):
    """The server sent something the protocol does not allow."""


@dataclass
class ClientCallbacks:
    """Policy hooks, invoked strictly in protocol order.

    on_observation receives the observation payload and returns an action
    payload, e.g. {"type": "move", "node": "v003"} / {"type": "ask",
    "text": ...} / {"type": "stop"} / {"type": "guess"}. on_localize_request
    returns a node id; on_answer_request returns answer text. When the
    server rejects an action, on_error sees the error payload and
    on_observation is re-invoked with the unchanged observation.
    """

    on_observation: Optional[Callable[[dict], dict]] = None
    on_episode_start: Optional[Callable[[dict], None]] = None
    on_localize_request: Optional[Callable[[dict], str]] = None
    on_answer_request: Optional[Callable[[dict], str]] = None
    on_episode_end: Optional[Callable[[dict], None]] = None
    on_error: Optional[Callable[[dict], None]] = None


@dataclass
class SessionResult:
    session_id: str
    role: str
    episode_id: Optional[str] = None
    outcome: Optional[dict] = None  # navigator-side metric record
    dialog_turns: Optional[int] = None  # guide-side end payload
    aborted: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    transcript: list = field(default_factory=list)  # raw inbound frames (bytes)


class _Wire:
    def __init__(self, sock: socket.socket):
        self._file = sock.makefile("rwb")
        self.out_seq = 0
        self.transcript: list[bytes] = []

    def send(self, kind: str, payload: dict) -> None:
        frame = json.dumps(
            {"seq": self.out_seq, "session_id": "", "kind": kind,
             "payload": payload},
            sort_keys=True,
        ).encode() + b"\n"
        if len(frame) > MAX_FRAME_BYTES:
            raise ProtocolViolation(f"outbound frame of {len(frame)} bytes")
        self.out_seq += 1
        self._file.write(frame)
        self._file.flush()

    def recv(self) -> dict:
        while True:
            line = self._file.readline(MAX_FRAME_BYTES + 1)
            if not line:
                raise ConnectionError("server closed the connection")
            if not line.strip():
                continue  # keepalive
            self.transcript.append(line)
            doc = json.loads(line)
            if not isinstance(doc, dict) or "kind" not in doc:
                raise ProtocolViolation(f"bad frame: {line[:80]!r}")
            return doc


def connect_and_register(
    address: tuple[str, int],
    role: str,
    callbacks: ClientCallbacks,
    timeout: float = 60.0,
) -> SessionResult:
    """Attach to a server, play one episode, return the session record.

    Blocks until episode_end or disconnect. Server error envelopes are
    surfaced through callbacks.on_error and never abort the loop.
    """
    if role not in ("navigator", "guide", "observer"):
        raise ValueError(f"unknown role {role!r}")
    sock = socket.create_connection(address, timeout=timeout)
    try:
        wire = _Wire(sock)
        wire.send("hello", {"role": role})
        hello = wire.recv()
        if hello["kind"] != "hello":
            raise ProtocolViolation(f"expected hello, got {hello['kind']}")
        result = SessionResult(hello["payload"]["session_id"], role)
        _message_loop(wire, callbacks, result)
        result.transcript = wire.transcript
        return result
    finally:
        sock.close()


def _message_loop(wire: _Wire, cb: ClientCallbacks, result: SessionResult) -> None:
    last_observation: Optional[dict] = None
    while True:
        try:
            msg = wire.recv()
        except ConnectionError:
            result.aborted.append("disconnect")
            return
        kind, payload = msg["kind"], msg["payload"]

        if kind == "episode_start":
            result.episode_id = payload.get("episode_id")
            if cb.on_episode_start is not None:
                cb.on_episode_start(payload)
            if result.role == "navigator":
                last_observation = payload["observation"]
                _act(wire, cb, last_observation)
            # The guide waits for localize_request; nothing to send yet.
        elif kind == "observation":
            last_observation = payload
            _act(wire, cb, payload)
        elif kind == "localize_request":
            if cb.on_localize_request is None:
                raise ProtocolViolation("localize_request without a handler")
            wire.send("localize_response", {"node": cb.on_localize_request(payload)})
        elif kind == "answer_request":
            if cb.on_answer_request is None:
                raise ProtocolViolation("answer_request without a handler")
            wire.send("answer_response", {"text": cb.on_answer_request(payload)})
        elif kind == "error":
            result.errors.append(payload)
            if cb.on_error is not None:
                cb.on_error(payload)
            if result.role == "navigator" and last_observation is not None:
                _act(wire, cb, last_observation)  # re-prompt after rejection
        elif kind == "episode_end":
            result.outcome = payload.get("outcome")
            result.dialog_turns = payload.get("dialog_turns")
            result.aborted = list(payload.get("aborted", []))
            if cb.on_episode_end is not None:
                cb.on_episode_end(payload)
            return
        else:
            raise ProtocolViolation(f"unexpected kind {kind!r}")


def _act(wire: _Wire, cb: ClientCallbacks, observation: dict) -> None:
    if cb.on_observation is None:
        raise ProtocolViolation("observation without a handler")
    wire.send("action", cb.on_observation(observation))
