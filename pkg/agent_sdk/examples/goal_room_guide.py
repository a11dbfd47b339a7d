#!/usr/bin/env python3
"""Scripted guide: localizes every question to a goal node (the only node
ids the wire protocol exposes to the guide) and answers by narrating the
server-computed shortest path.

    python3 examples/goal_room_guide.py --host 127.0.0.1 --port 8750
"""

import argparse

from dialnav_sdk import ClientCallbacks, connect_and_register


class GoalRoomGuide:
    def __init__(self):
        self.goal_nodes = []

    def note_start(self, payload):
        self.goal_nodes = payload["goal"]["nodes"]

    def localize(self, payload):
        return self.goal_nodes[0]

    def answer(self, payload):
        steps = payload["shortest_path"]["path"]
        if len(steps) <= 1:
            return "Stay where you are, that is the goal room."
        rooms = []
        for s in steps:
            if not rooms or rooms[-1] != s["room_type"]:
                rooms.append(s["room_type"])
        meters = payload["shortest_path"]["length_m"]
        return f"Go through the {', then the '.join(rooms)} ({meters:.0f} m)."


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8750)
    args = ap.parse_args()

    guide = GoalRoomGuide()
    result = connect_and_register(
        (args.host, args.port), "guide",
        ClientCallbacks(
            on_episode_start=guide.note_start,
            on_localize_request=guide.localize,
            on_answer_request=guide.answer,
            on_episode_end=lambda p: print("episode over:", p),
        ),
    )
    print(f"session {result.session_id} finished episode {result.episode_id}")


if __name__ == "__main__":
    main()
