#!/usr/bin/env python3
"""Generate a small synthetic dataset (graphs, episodes, manifest) so the
CLI and the server can be exercised without any released data.

    python3 scripts/make_toy_dataset.py out/toy --houses 4 --episodes 24
"""

import argparse
import json
import random
from pathlib import Path

from dialnav.env_graph import load_graph

ROOM_TYPES = ["hallway", "kitchen", "living room", "bathroom", "bedroom",
              "office", "dining room"]
OBJECTS = {
    "hallway": ["plant", "coat rack"],
    "kitchen": ["stove", "fridge", "sink"],
    "living room": ["sofa", "tv", "bookshelf"],
    "bathroom": ["bathtub", "mirror"],
    "bedroom": ["bed", "wardrobe"],
    "office": ["desk", "monitor"],
    "dining room": ["table", "chairs"],
}


def make_house(rng: random.Random, scan_id: str, n_rooms: int = 5) -> dict:
    rooms = []
    nodes = []
    node_counter = 0
    for r in range(n_rooms):
        room_type = rng.choice(ROOM_TYPES)
        floor = 1 + (r >= (n_rooms + 1) // 2)
        room_id = f"{room_type.replace(' ', '')}{r}"
        rooms.append({"room_id": room_id, "room_type": room_type,
                      "floor": floor, "objects": OBJECTS[room_type]})
        cx, cy = rng.uniform(0, 20), rng.uniform(0, 20)
        for _ in range(rng.randint(2, 4)):
            nodes.append({
                "id": f"v{node_counter:03d}",
                "x": cx + rng.uniform(-1.5, 1.5),
                "y": cy + rng.uniform(-1.5, 1.5),
                "z": 0.0 if floor == 1 else 3.0,
                "room_id": room_id,
                "objects": rng.sample(OBJECTS[room_type],
                                      rng.randint(0, len(OBJECTS[room_type]))),
            })
            node_counter += 1
    ids = [n["id"] for n in nodes]
    edges = set()
    shuffled = ids[:]
    rng.shuffle(shuffled)
    for i in range(1, len(ids)):  # spanning tree keeps the house connected
        edges.add(tuple(sorted((shuffled[i], shuffled[rng.randrange(i)]))))
    for _ in range(len(ids) // 2):
        a, b = rng.sample(ids, 2)
        edges.add(tuple(sorted((a, b))))
    return {"scan_id": scan_id, "rooms": rooms, "nodes": nodes,
            "edges": [{"a": a, "b": b} for a, b in sorted(edges)]}


def make_episode(rng, graph, scan_id, episode_id, split):
    ids = graph.node_ids
    start = rng.choice(ids)
    goal_node = rng.choice([n for n in ids if n != start])
    goal_room = graph.room_of(goal_node)
    goal_nodes = [n for n in ids if graph.room_of(n).room_id == goal_room.room_id]
    path = graph.shortest_path(start, goal_node)
    # Pad the shortest path with a small detour so trajectories look human.
    trajectory = list(path)
    if len(trajectory) > 1 and rng.random() < 0.7:
        mid = rng.randrange(len(trajectory) - 1)
        side = rng.choice(graph.neighbors(trajectory[mid]))
        trajectory = trajectory[: mid + 1] + [side, trajectory[mid]] + trajectory[mid + 1:]
    dialog = []
    for k in range(rng.randint(0, 3)):
        node = trajectory[rng.randrange(len(trajectory))]
        room = graph.room_of(node)
        dialog.append({
            "question": f"I'm in a {room.room_type}. Where should I go?",
            "answer": f"Head toward the {goal_room.room_type}.",
            "node": node,
        })
    # Dialog node order must follow the walk; anchor by first occurrence.
    dialog.sort(key=lambda t: trajectory.index(t["node"]))
    return {
        "episode_id": episode_id,
        "scan": scan_id,
        "split": split,
        "start_node": start,
        "goal": {"nodes": sorted(goal_nodes), "room": goal_room.room_id},
        "instruction": f"Find the {goal_room.room_type} with "
                       f"{', '.join(goal_room.objects) or 'nothing'} in it.",
        "trajectory": trajectory,
        "dialog": dialog,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("output", type=Path)
    ap.add_argument("--houses", type=int, default=4)
    ap.add_argument("--episodes", type=int, default=24)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    graph_dir = args.output / "graphs"
    ep_dir = args.output / "episodes"
    graph_dir.mkdir(parents=True, exist_ok=True)
    ep_dir.mkdir(parents=True, exist_ok=True)

    graphs = {}
    for h in range(args.houses):
        scan_id = f"toy{h:02d}"
        doc = make_house(rng, scan_id)
        (graph_dir / f"{scan_id}.json").write_text(json.dumps(doc, indent=2))
        graphs[scan_id] = load_graph(json.dumps(doc))

    splits = ["train"] * 6 + ["val_seen", "val_unseen", "test"]
    entries = []
    for i in range(args.episodes):
        scan_id = rng.choice(sorted(graphs))
        split = rng.choice(splits)
        doc = make_episode(rng, graphs[scan_id], scan_id, f"toy_ep{i:03d}", split)
        name = f"{doc['episode_id']}.json"
        (ep_dir / name).write_text(json.dumps(doc, indent=2))
        entries.append({"path": f"episodes/{name}", "split": split})

    (args.output / "manifest.json").write_text(json.dumps(
        {"graph_dir": "graphs", "episodes": entries}, indent=2
    ))
    print(f"wrote {args.houses} graphs and {args.episodes} episodes "
          f"to {args.output}")


if __name__ == "__main__":
    main()
