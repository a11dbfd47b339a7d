#!/usr/bin/env python3
"""Scripted navigator: wanders randomly, asks every few steps, and stops
when the current room's objects overlap the instruction text.

    python3 examples/random_walker.py --host 127.0.0.1 --port 8750
"""

import argparse
import random

from dialnav_sdk import ClientCallbacks, connect_and_register


class RandomWalker:
    def __init__(self, seed=0, ask_every=5, max_steps=60):
        self.rng = random.Random(seed)
        self.steps = 0
        self.ask_every = ask_every
        self.max_steps = max_steps

    def act(self, obs):
        current = obs["current"]
        instruction_words = set()  # filled lazily from the first observation
        if "instruction" in obs:
            instruction_words = set(obs["instruction"].lower().split())
        objects = {o.lower() for o in current.get("objects", [])}
        if objects & instruction_words or self.steps >= self.max_steps:
            return {"type": "stop"}
        self.steps += 1
        if self.ask_every and self.steps % self.ask_every == 0:
            room = current.get("room_type") or "room"
            seen = ", ".join(current.get("objects", [])) or "nothing notable"
            return {"type": "ask", "text": f"I'm in a {room}. I can see {seen}."}
        neighbor = self.rng.choice(obs["neighbors"])
        return {"type": "move", "node": neighbor["id"]}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8750)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    walker = RandomWalker(seed=args.seed)
    result = connect_and_register(
        (args.host, args.port), "navigator",
        ClientCallbacks(
            on_observation=walker.act,
            on_episode_end=lambda p: print("episode over:", p.get("outcome")),
            on_error=lambda p: print("server error:", p),
        ),
    )
    print(f"session {result.session_id} finished episode {result.episode_id}")


if __name__ == "__main__":
    main()
