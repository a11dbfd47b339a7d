import json
import math
import random

import pytest

from dialnav.env_graph import EnvironmentGraph, GoalRegion, load_graph


def brute_force_geodesic(graph: EnvironmentGraph, a: str, b: str) -> float:
    """Exhaustive minimum over all simple paths; the independent oracle for
    Dijkstra-based queries. Only usable on small graphs."""
    best = math.inf

    def visit(node, total, seen):
        nonlocal best
        if node == b:
            best = min(best, total)
            return
        for v in graph.neighbors(node):
            if v not in seen:
                visit(v, total + graph.edge_length(node, v), seen | {v})

    visit(a, 0.0, {a})
    return best


def random_connected_graph_doc(rng: random.Random, n: int, scan_id: str = "rand") -> dict:
    """A random geometric-ish connected graph document with n nodes."""
    ids = [f"n{i:02d}" for i in range(n)]
    nodes = []
    for i, nid in enumerate(ids):
        nodes.append({
            "id": nid,
            "x": rng.uniform(0, 10),
            "y": rng.uniform(0, 10),
            "z": rng.choice([0.0, 3.0]),
            "room_id": "r0",
            "objects": [],
        })
    edges = set()
    shuffled = ids[:]
    rng.shuffle(shuffled)
    for i in range(1, n):  # random spanning tree keeps it connected
        a = shuffled[i]
        b = shuffled[rng.randrange(i)]
        edges.add(tuple(sorted((a, b))))
    extra = rng.randrange(0, n)
    for _ in range(extra):
        a, b = rng.sample(ids, 2)
        edges.add(tuple(sorted((a, b))))
    return {
        "scan_id": scan_id,
        "rooms": [{"room_id": "r0", "room_type": "hall", "floor": 1, "objects": []}],
        "nodes": nodes,
        "edges": [{"a": a, "b": b} for a, b in sorted(edges)],
    }


HOUSE_DOC = {
    "scan_id": "house1",
    "rooms": [
        {"room_id": "hall1", "room_type": "hallway", "floor": 1, "objects": ["plant"]},
        {"room_id": "kit1", "room_type": "kitchen", "floor": 1, "area": 14.0,
         "objects": ["stove", "fridge"]},
        {"room_id": "liv1", "room_type": "living room", "floor": 1,
         "objects": ["sofa", "tv"]},
        {"room_id": "bath2", "room_type": "bathroom", "floor": 2, "objects": ["bathtub"]},
        {"room_id": "bed2", "room_type": "bedroom", "floor": 2, "objects": ["bed"]},
    ],
    "nodes": [
        {"id": "A", "x": 0.0, "y": 0.0, "z": 0.0, "room_id": "hall1",
         "objects": ["plant"]},
        {"id": "B", "x": 2.0, "y": 0.0, "z": 0.0, "room_id": "hall1", "objects": []},
        {"id": "C", "x": 4.0, "y": 0.0, "z": 0.0, "room_id": "kit1",
         "objects": ["stove"], "caption": "a bright kitchen"},
        {"id": "D", "x": 4.0, "y": 2.0, "z": 0.0, "room_id": "kit1",
         "objects": ["fridge"]},
        {"id": "E", "x": 2.0, "y": 2.0, "z": 0.0, "room_id": "liv1",
         "objects": ["sofa", "tv"]},
        {"id": "F", "x": 2.0, "y": 0.0, "z": 3.0, "room_id": "bath2",
         "objects": ["bathtub"]},
        {"id": "G", "x": 4.0, "y": 0.0, "z": 3.0, "room_id": "bed2",
         "objects": ["bed"]},
    ],
    "edges": [
        {"a": "A", "b": "B"},
        {"a": "B", "b": "C"},
        {"a": "C", "b": "D"},
        {"a": "D", "b": "E"},
        {"a": "B", "b": "E"},
        {"a": "B", "b": "F", "length": 3.8},
        {"a": "F", "b": "G"},
    ],
}

LINE_DOC = {
    "scan_id": "line1",
    "rooms": [{"room_id": "r0", "room_type": "hall", "floor": 1, "objects": []}],
    "nodes": [
        {"id": "A", "x": 0.0, "y": 0.0, "z": 0.0, "room_id": "r0", "objects": []},
        {"id": "B", "x": 2.0, "y": 0.0, "z": 0.0, "room_id": "r0", "objects": []},
        {"id": "C", "x": 4.0, "y": 0.0, "z": 0.0, "room_id": "r0", "objects": []},
        {"id": "D", "x": 6.0, "y": 0.0, "z": 0.0, "room_id": "r0", "objects": []},
    ],
    "edges": [
        {"a": "A", "b": "B"},
        {"a": "B", "b": "C"},
        {"a": "C", "b": "D"},
    ],
}


@pytest.fixture
def house():
    return load_graph(json.dumps(HOUSE_DOC))


@pytest.fixture
def line():
    return load_graph(json.dumps(LINE_DOC))


EPISODE_DOC = {
    "episode_id": "ep001",
    "scan": "house1",
    "split": "train",
    "start_node": "A",
    "goal": {"nodes": ["G"], "room": "bed2"},
    "instruction": "The goal room contains a bed.",
    "trajectory": ["A", "B", "E", "B", "F", "G"],
    "dialog": [
        {"question": "I'm in a living room. I can see sofa, tv.",
         "answer": "Go back to the hallway and take the stairs up.",
         "node": "E", "estimated_node": "E"},
        {"question": "I'm in a bathroom. I can see bathtub.",
         "answer": "The bedroom next to you is the goal.",
         "node": "F", "estimated_node": "B"},
    ],
    "scores": {"navigator": 5, "guide": 4},
}


@pytest.fixture
def episode_doc():
    return json.loads(json.dumps(EPISODE_DOC))


@pytest.fixture
def dataset_dir(tmp_path):
    """A manifest with three episodes over the house fixture graph."""
    graph_dir = tmp_path / "graphs"
    graph_dir.mkdir()
    (graph_dir / "house1.json").write_text(json.dumps(HOUSE_DOC))
    ep_dir = tmp_path / "episodes"
    ep_dir.mkdir()

    docs = [json.loads(json.dumps(EPISODE_DOC))]
    short = {
        "episode_id": "ep002",
        "scan": "house1",
        "split": "val_seen",
        "start_node": "C",
        "goal": {"nodes": ["D"]},
        "instruction": "The goal room contains a fridge.",
        "trajectory": ["C", "D"],
        "dialog": [
            {"question": "I'm in a kitchen. I can see stove.",
             "answer": "Walk to the fridge corner.", "node": "C"},
        ],
    }
    nodialog = {
        "episode_id": "ep003",
        "scan": "house1",
        "split": "val_seen",
        "start_node": "B",
        "goal": {"nodes": ["F"], "room": "bath2"},
        "instruction": "The goal room contains a bathtub.",
        "trajectory": ["B", "F"],
        "dialog": [],
    }
    docs += [short, nodialog]
    entries = []
    for doc in docs:
        p = ep_dir / f"{doc['episode_id']}.json"
        p.write_text(json.dumps(doc))
        entries.append({"path": f"episodes/{doc['episode_id']}.json",
                        "split": doc["split"]})
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"graph_dir": "graphs", "episodes": entries}))
    return tmp_path


@pytest.fixture
def house_goal():
    return GoalRegion.of("G", room_id="bed2")
