import asyncio
import json
import random

import pytest

from dialnav import engine as eng
from dialnav import protocol
from dialnav.engine import EngineConfig, EpisodeTask
from dialnav.env_graph import GoalRegion
from dialnav.protocol import (
    DialNavServer,
    Envelope,
    KINDS,
    MAX_FRAME_BYTES,
    ProtocolError,
    ServeConfig,
    decode,
    encode,
    shortest_path_payload,
)


# ------------------------------------------------------------------- codec


class TestCodec:
    def test_round_trip_every_kind(self):
        for i, kind in enumerate(sorted(KINDS)):
            env = Envelope(i, "navigator-1", kind, {"n": i, "text": "héllo"})
            assert decode(encode(env)) == env

    def test_frames_are_single_lines(self):
        frame = encode(Envelope(0, "s", "hello", {"role": "guide"}))
        assert frame.endswith(b"\n")
        assert frame.count(b"\n") == 1

    def test_unknown_kind_rejected_both_ways(self):
        with pytest.raises(ProtocolError) as e:
            encode(Envelope(0, "s", "heartbeat", {}))
        assert e.value.code == "unknown_kind"
        frame = json.dumps(
            {"seq": 0, "session_id": "s", "kind": "heartbeat", "payload": {}}
        ).encode()
        with pytest.raises(ProtocolError) as e:
            decode(frame)
        assert e.value.code == "unknown_kind"

    def test_missing_field_rejected(self):
        with pytest.raises(ProtocolError) as e:
            decode(b'{"seq": 0, "kind": "hello", "payload": {}}')
        assert e.value.code == "malformed"

    def test_oversized_frame_rejected(self):
        env = Envelope(0, "s", "observation", {"blob": "x" * MAX_FRAME_BYTES})
        with pytest.raises(ProtocolError) as e:
            encode(env)
        assert e.value.code == "oversized_frame"
        with pytest.raises(ProtocolError):
            decode(b"x" * (MAX_FRAME_BYTES + 1))

    def test_unknown_payload_fields_pass_through(self):
        frame = json.dumps({
            "seq": 3, "session_id": "s", "kind": "action",
            "payload": {"type": "move", "node": "A", "future_field": [1, 2]},
        }).encode()
        assert decode(frame).payload["future_field"] == [1, 2]

    def test_decode_fuzz_never_crashes(self):
        rng = random.Random(7)
        for _ in range(500):
            blob = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 80)))
            try:
                decode(blob)
            except ProtocolError:
                pass  # the only acceptable failure mode

    def test_shortest_path_payload_server_side(self, house, house_goal):
        p = shortest_path_payload(house, "A", house_goal)
        assert p["path"][0]["id"] == "A"
        assert p["path"][-1]["id"] == "G"
        assert p["length_m"] == pytest.approx(house.geodesic_to_region("A", house_goal))
        assert {"room_type", "floor"} <= set(p["path"][0])


# ---------------------------------------------------------- scripted clients


class Client:
    """Minimal scripted peer over the TCP stream transport."""

    def __init__(self, reader, writer):
        self.reader = reader
        self.writer = writer
        self.seq = 0
        self.inbound: list[Envelope] = []

    @classmethod
    async def connect(cls, port, role):
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        c = cls(reader, writer)
        await c.send("hello", {"role": role})
        hello = await c.recv()
        assert hello.kind == "hello"
        c.session_id = hello.payload["session_id"]
        return c

    async def send(self, kind, payload):
        self.writer.write(encode(Envelope(self.seq, "", kind, payload)))
        self.seq += 1
        await self.writer.drain()

    async def send_raw(self, data: bytes):
        self.writer.write(data)
        await self.writer.drain()

    async def recv(self) -> Envelope:
        while True:
            line = await self.reader.readline()
            if not line:
                raise ConnectionError("closed")
            if not line.strip():
                continue
            env = decode(line)
            self.inbound.append(env)
            return env

    async def close(self):
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except ConnectionResetError:
            pass


async def drive_navigator(client, actions):
    """Send scripted actions; return the episode_end envelope."""
    start = await client.recv()
    assert start.kind == "episode_start"
    for action in actions:
        await client.send("action", action)
        msg = await client.recv()
        if msg.kind == "episode_end":
            return msg
        assert msg.kind == "observation", msg.kind
    msg = await client.recv()
    assert msg.kind == "episode_end"
    return msg


async def drive_guide(client, estimates, answer_text="head upstairs"):
    start = await client.recv()
    assert start.kind == "episode_start"
    it = iter(estimates)
    while True:
        msg = await client.recv()
        if msg.kind == "episode_end":
            return msg
        if msg.kind == "localize_request":
            await client.send("localize_response", {"node": next(it)})
        elif msg.kind == "answer_request":
            await client.send("answer_response", {"text": answer_text})


async def start_server(tasks, **overrides):
    cfg = ServeConfig(port=0, turn_timeout=overrides.pop("turn_timeout", 5.0),
                      **overrides)
    server = DialNavServer(cfg, tasks)
    await server.start()
    return server


def house_task(house, episode_id="ep-net"):
    return EpisodeTask(episode_id, house, "A", GoalRegion.of("G", room_id="bed2"),
                       "find the bedroom upstairs")


NAV_SCRIPT = [
    {"type": "move", "node": "B"},
    {"type": "ask", "text": "I'm in a hallway. I can see nothing notable."},
    {"type": "move", "node": "F"},
    {"type": "move", "node": "G"},
    {"type": "stop"},
]


# ----------------------------------------------------------------- sessions


class TestServer:
    def run(self, coro):
        return asyncio.run(asyncio.wait_for(coro, 30))

    def test_full_episode_over_the_wire(self, house):
        async def scenario():
            server = await start_server([house_task(house)], max_episodes=1)
            nav = await Client.connect(server.port, "navigator")
            gui = await Client.connect(server.port, "guide")
            nav_end, gui_end = await asyncio.gather(
                drive_navigator(nav, NAV_SCRIPT),
                drive_guide(gui, estimates=["B"]),
            )
            await server.all_done.wait()
            await nav.close()
            await gui.close()
            await server.close()
            return server, nav_end, gui_end

        server, nav_end, gui_end = self.run(scenario())
        outcome = nav_end.payload["outcome"]
        assert outcome["success"] == 1
        assert outcome["spl"] == pytest.approx(1.0)
        assert outcome["episode_id"] == "ep-net"
        assert gui_end.payload == {
            "episode_id": "ep-net", "dialog_turns": 1, "aborted": [],
        }
        # The recorded event log replays bit-identically.
        log = server.event_logs["ep-net"]
        events = eng.parse_event_log(log)
        replayed = eng.replay_events(events, house)
        assert eng.serialize_event_log(replayed.event_log) == log

    def test_localize_then_answer_ordering(self, house):
        async def scenario():
            server = await start_server([house_task(house)], max_episodes=1)
            nav = await Client.connect(server.port, "navigator")
            gui = await Client.connect(server.port, "guide")
            await asyncio.gather(
                drive_navigator(nav, NAV_SCRIPT),
                drive_guide(gui, estimates=["E"]),
            )
            await server.close()
            return gui.inbound

        frames = self.run(scenario())
        kinds = [f.kind for f in frames]
        assert kinds == ["hello", "episode_start", "localize_request",
                         "answer_request", "episode_end"]
        answer_req = frames[3]
        assert answer_req.payload["estimate"] == "E"
        # The server computes the path from the guide's (wrong) estimate.
        path = [s["id"] for s in answer_req.payload["shortest_path"]["path"]]
        assert path[0] == "E" and path[-1] == "G"

    def test_guide_sees_goal_and_summary_not_position(self, house):
        async def scenario():
            server = await start_server([house_task(house)], max_episodes=1)
            nav = await Client.connect(server.port, "navigator")
            gui = await Client.connect(server.port, "guide")
            await asyncio.gather(
                drive_navigator(nav, NAV_SCRIPT),
                drive_guide(gui, estimates=["B"]),
            )
            await server.close()
            return gui.inbound

        frames = self.run(scenario())
        start = frames[1].payload
        assert start["goal"] == {"nodes": ["G"], "room": "bed2"}
        assert start["house_summary"]["rooms"] == 5
        blob = json.dumps([
            {"kind": f.kind, "payload": f.payload} for f in frames
        ])
        for forbidden in ("current", "trajectory", "nav_steps_used", "visited"):
            assert f'"{forbidden}"' not in blob

    def test_guide_transcript_independent_of_trajectory(self, house):
        """Two runs with identical dialog but different navigator paths must
        produce byte-identical guide-bound payload streams."""
        detour_script = [
            {"type": "move", "node": "B"},
            {"type": "ask", "text": "I'm in a hallway. I can see nothing notable."},
            {"type": "move", "node": "C"},   # different route than NAV_SCRIPT
            {"type": "move", "node": "B"},
            {"type": "move", "node": "F"},
            {"type": "move", "node": "G"},
            {"type": "stop"},
        ]

        def transcript(script):
            async def scenario():
                server = await start_server([house_task(house)], max_episodes=1)
                nav = await Client.connect(server.port, "navigator")
                gui = await Client.connect(server.port, "guide")
                await asyncio.gather(
                    drive_navigator(nav, script),
                    drive_guide(gui, estimates=["E"]),
                )
                await server.close()
                return [
                    {"kind": f.kind, "payload": f.payload} for f in gui.inbound[1:]
                ]

            return self.run(scenario())

        assert transcript(NAV_SCRIPT) == transcript(detour_script)

    def test_malformed_and_bad_seq_frames_survive(self, house):
        async def scenario():
            server = await start_server([house_task(house)], max_episodes=1)
            nav = await Client.connect(server.port, "navigator")
            gui = await Client.connect(server.port, "guide")

            async def navigator():
                start = await nav.recv()
                assert start.kind == "episode_start"
                await nav.send_raw(b"this is not json\n")
                err = await nav.recv()
                assert err.kind == "error" and err.payload["code"] == "malformed"
                await nav.send_raw(encode(Envelope(99, "", "action",
                                                   {"type": "stop"})))
                err = await nav.recv()
                assert err.kind == "error" and err.payload["code"] == "bad_seq"
                return await drive_navigator_continue(nav)

            async def drive_navigator_continue(nav):
                for action in NAV_SCRIPT:
                    await nav.send("action", action)
                    msg = await nav.recv()
                    if msg.kind == "episode_end":
                        return msg
                msg = await nav.recv()
                return msg

            nav_end, _ = await asyncio.gather(
                navigator(), drive_guide(gui, estimates=["B"]),
            )
            await server.close()
            return nav_end

        nav_end = self.run(scenario())
        assert nav_end.payload["outcome"]["success"] == 1

    def test_invalid_move_gets_error_and_episode_continues(self, house):
        script = [{"type": "move", "node": "G"}]  # not adjacent to A

        async def scenario():
            server = await start_server([house_task(house)], max_episodes=1)
            nav = await Client.connect(server.port, "navigator")
            gui = await Client.connect(server.port, "guide")
            start = await nav.recv()
            assert start.kind == "episode_start"
            await nav.send("action", script[0])
            err = await nav.recv()
            assert err.kind == "error" and err.payload["code"] == "invalid_action"
            gui_task = asyncio.create_task(drive_guide(gui, estimates=["B"]))
            for action in NAV_SCRIPT:
                await nav.send("action", action)
                msg = await nav.recv()
                if msg.kind == "episode_end":
                    break
            await gui_task
            await server.close()
            return msg

        end = self.run(scenario())
        assert end.payload["outcome"]["success"] == 1

    def test_navigator_disconnect_aborts_with_tag(self, house):
        async def scenario():
            server = await start_server([house_task(house)], max_episodes=1,
                                        turn_timeout=2.0)
            nav = await Client.connect(server.port, "navigator")
            gui = await Client.connect(server.port, "guide")

            async def navigator():
                start = await nav.recv()
                assert start.kind == "episode_start"
                await nav.send("action", {"type": "move", "node": "B"})
                await nav.recv()  # observation
                await nav.close()  # vanish mid-episode

            gui_task = asyncio.create_task(drive_guide(gui, estimates=["B"]))
            await navigator()
            gui_end = await gui_task
            await server.all_done.wait()
            await server.close()
            return server, gui_end

        server, gui_end = self.run(scenario())
        assert gui_end.payload["aborted"] == ["disconnect"]
        assert server.completed[0]["tags"] == ["disconnect"]
        assert server.completed[0]["success"] == 0

    def test_blank_line_keepalives_ignored(self, house):
        async def scenario():
            server = await start_server([house_task(house)], max_episodes=1)
            nav = await Client.connect(server.port, "navigator")
            gui = await Client.connect(server.port, "guide")

            async def navigator():
                start = await nav.recv()
                assert start.kind == "episode_start"
                for action in NAV_SCRIPT:
                    await nav.send_raw(b"\n\n")  # keepalives between frames
                    await nav.send("action", action)
                    msg = await nav.recv()
                    if msg.kind == "episode_end":
                        return msg
                return await nav.recv()

            end, _ = await asyncio.gather(
                navigator(), drive_guide(gui, estimates=["B"]),
            )
            await server.close()
            return end

        end = self.run(scenario())
        assert end.payload["outcome"]["success"] == 1

    def test_wrong_guess_keeps_episode_alive(self, house):
        task = EpisodeTask("ep-guess", house, "A", GoalRegion.of("G"), "go")

        async def scenario():
            server = await start_server(
                [task], max_episodes=1,
                engine=EngineConfig(interactive_guess_mode=True),
            )
            nav = await Client.connect(server.port, "navigator")
            gui = await Client.connect(server.port, "guide")
            gui_task = asyncio.create_task(drive_guide(gui, estimates=[]))
            start = await nav.recv()
            assert start.kind == "episode_start"
            await nav.send("action", {"type": "guess"})
            obs = await nav.recv()
            assert obs.payload.get("guess_result") == "incorrect"
            for action in [{"type": "move", "node": "B"},
                           {"type": "move", "node": "F"},
                           {"type": "move", "node": "G"},
                           {"type": "guess"}]:
                await nav.send("action", action)
                msg = await nav.recv()
            await gui_task
            await server.close()
            return msg

        end = self.run(scenario())
        assert end.kind == "episode_end"
        assert end.payload["outcome"]["success"] == 1

    def test_sixteen_concurrent_episodes(self, house):
        n = 16
        tasks = [house_task(house, f"ep{k:02d}") for k in range(n)]

        async def scenario():
            server = await start_server(tasks, max_episodes=n)

            async def pair():
                nav = await Client.connect(server.port, "navigator")
                gui = await Client.connect(server.port, "guide")
                nav_end, _ = await asyncio.gather(
                    drive_navigator(nav, NAV_SCRIPT),
                    drive_guide(gui, estimates=["B"]),
                )
                await nav.close()
                await gui.close()
                return nav_end.payload["outcome"]["episode_id"]

            ids = await asyncio.gather(*[pair() for _ in range(n)])
            await server.all_done.wait()
            await server.close()
            return server, ids

        server, ids = self.run(scenario())
        assert sorted(ids) == [f"ep{k:02d}" for k in range(n)]
        assert len(server.completed) == n
        assert all(r["success"] == 1 for r in server.completed)
        assert sorted(server.event_logs) == sorted(ids)

    def test_bad_role_rejected(self, house):
        async def scenario():
            server = await start_server([house_task(house)])
            reader, writer = await asyncio.open_connection("127.0.0.1", server.port)
            c = Client(reader, writer)
            await c.send("hello", {"role": "referee"})
            err = await c.recv()
            await server.close()
            return err

        err = self.run(scenario())
        assert err.kind == "error" and err.payload["code"] == "bad_role"


class TestWebSocket:
    def test_full_episode_over_websocket(self, house):
        websockets = pytest.importorskip("websockets")

        class WsClient(Client):
            def __init__(self, ws):
                self.ws = ws
                self.seq = 0
                self.inbound = []

            async def send(self, kind, payload):
                await self.ws.send(
                    encode(Envelope(self.seq, "", kind, payload)).decode()
                )
                self.seq += 1

            async def recv(self):
                msg = await self.ws.recv()
                env = decode(msg.encode() if isinstance(msg, str) else msg)
                self.inbound.append(env)
                return env

        async def scenario():
            server = DialNavServer(ServeConfig(port=0), [house_task(house)])
            await server.start()
            await server.serve_websocket(0)
            ws_port = server._ws_server.sockets[0].getsockname()[1]

            async def ws_peer(role):
                ws = await websockets.connect(f"ws://127.0.0.1:{ws_port}/session")
                c = WsClient(ws)
                await c.send("hello", {"role": role})
                hello = await c.recv()
                assert hello.kind == "hello"
                return c, ws

            nav, nav_ws = await ws_peer("navigator")
            gui, gui_ws = await ws_peer("guide")
            nav_end, _ = await asyncio.gather(
                drive_navigator(nav, NAV_SCRIPT),
                drive_guide(gui, estimates=["B"]),
            )
            await nav_ws.close()
            await gui_ws.close()
            await server.close()
            return nav_end

        nav_end = asyncio.run(asyncio.wait_for(scenario(), 30))
        assert nav_end.payload["outcome"]["success"] == 1
        assert nav_end.payload["outcome"]["spl"] == pytest.approx(1.0)
