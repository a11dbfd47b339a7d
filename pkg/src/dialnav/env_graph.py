"""House environment graphs: weighted navigation graphs with room/object
annotations and geodesic queries.

A graph is immutable after :func:`load_graph`; every query here is pure and
safe to call from any number of concurrent readers.
"""

from __future__ import annotations

import heapq
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

NodeId = str

# Tolerance for comparing summed edge weights when reconstructing shortest
# paths (weights are metric distances, well within float precision).
_DIST_EPS = 1e-9


class GraphError(ValueError):
    """Malformed or inconsistent environment graph input."""


class UnknownNodeError(KeyError):
    """A node id that does not exist in the graph."""

    def __init__(self, node_id: str):
        super().__init__(node_id)
        self.node_id = node_id

    def __str__(self) -> str:
        return f"unknown node id: {self.node_id!r}"


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    z: float

    def distance_to(self, other: "Position") -> float:
        return math.sqrt(
            (self.x - other.x) ** 2
            + (self.y - other.y) ** 2
            + (self.z - other.z) ** 2
        )


@dataclass(frozen=True)
class NodeAnnotation:
    room_id: str
    caption: Optional[str] = None
    objects: tuple[str, ...] = ()
    image_ref: Optional[str] = None


@dataclass(frozen=True)
class Room:
    room_id: str
    room_type: str
    floor: int
    area: Optional[float] = None
    objects: tuple[str, ...] = ()


@dataclass(frozen=True)
class EnvEdge:
    a: NodeId
    b: NodeId
    length: float


@dataclass(frozen=True)
class GoalRegion:
    """A non-empty set of nodes constituting the target room."""

    node_ids: frozenset[str]
    region_room_id: Optional[str] = None

    def __post_init__(self):
        if not self.node_ids:
            raise ValueError("goal region must contain at least one node")

    @classmethod
    def of(cls, *node_ids: str, room_id: Optional[str] = None) -> "GoalRegion":
        return cls(frozenset(node_ids), room_id)


@dataclass(frozen=True)
class RoomSummary:
    room_id: str
    room_type: str
    floor: int
    objects: tuple[str, ...]
    distance_to_goal: float


@dataclass(frozen=True)
class HouseSummary:
    floor_count: int
    room_count: int
    rooms: tuple[RoomSummary, ...]  # sorted by distance_to_goal ascending


class EnvironmentGraph:
    """A validated, immutable house graph.

    Nodes carry 3D positions and room/object annotations; edges are
    undirected with metric lengths.
    """

    def __init__(
        self,
        scan_id: str,
        positions: Mapping[NodeId, Position],
        annotations: Mapping[NodeId, NodeAnnotation],
        rooms: Mapping[str, Room],
        edges: Sequence[EnvEdge],
    ):
        self.scan_id = scan_id
        self._positions = dict(positions)
        self._annotations = dict(annotations)
        self._rooms = dict(rooms)
        self._edges = tuple(edges)
        adjacency: dict[NodeId, dict[NodeId, float]] = {n: {} for n in self._positions}
        for e in self._edges:
            adjacency[e.a][e.b] = e.length
            adjacency[e.b][e.a] = e.length
        self._adj = adjacency
        # Per-source Dijkstra results, filled lazily. The graph is immutable
        # so the cache never invalidates.
        self._dist_cache: dict[NodeId, dict[NodeId, float]] = {}

    # ------------------------------------------------------------- accessors

    @property
    def node_ids(self) -> list[NodeId]:
        return sorted(self._positions)

    @property
    def rooms(self) -> dict[str, Room]:
        return dict(self._rooms)

    @property
    def edges(self) -> tuple[EnvEdge, ...]:
        return self._edges

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._positions

    def position(self, node_id: NodeId) -> Position:
        self._require(node_id)
        return self._positions[node_id]

    def annotation(self, node_id: NodeId) -> NodeAnnotation:
        self._require(node_id)
        return self._annotations[node_id]

    def room_of(self, node_id: NodeId) -> Room:
        return self._rooms[self.annotation(node_id).room_id]

    def neighbors(self, node_id: NodeId) -> list[NodeId]:
        self._require(node_id)
        return sorted(self._adj[node_id])

    def edge_length(self, a: NodeId, b: NodeId) -> float:
        self._require(a)
        self._require(b)
        try:
            return self._adj[a][b]
        except KeyError:
            raise GraphError(f"nodes {a!r} and {b!r} are not adjacent") from None

    def _require(self, node_id: NodeId) -> None:
        if node_id not in self._positions:
            raise UnknownNodeError(node_id)

    # --------------------------------------------------------------- queries

    def euclidean_distance(self, a: NodeId, b: NodeId) -> float:
        """Straight-line distance between two node positions, in meters."""
        return self.position(a).distance_to(self.position(b))

    def _distances_from(self, source: NodeId) -> dict[NodeId, float]:
        self._require(source)
        cached = self._dist_cache.get(source)
        if cached is not None:
            return cached
        dist: dict[NodeId, float] = {source: 0.0}
        heap: list[tuple[float, NodeId]] = [(0.0, source)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist.get(u, math.inf):
                continue
            for v, w in self._adj[u].items():
                nd = d + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        self._dist_cache[source] = dist
        return dist

    def geodesic_distance(self, a: NodeId, b: NodeId) -> float:
        """Minimum total edge length between two nodes along the graph."""
        self._require(b)
        return self._distances_from(a)[b]

    def geodesic_to_region(self, node: NodeId, region: GoalRegion) -> float:
        """Distance to the nearest node of the region."""
        self._check_region(region)
        dist = self._distances_from(node)
        return min(dist[r] for r in region.node_ids)

    def shortest_path(self, start: NodeId, end: NodeId) -> list[NodeId]:
        return self.shortest_path_to_region(start, GoalRegion.of(end))

    def shortest_path_to_region(self, start: NodeId, region: GoalRegion) -> list[NodeId]:
        """Minimum-length path from start to the nearest region node.

        Ties are broken deterministically: first by lexicographically
        smallest terminal node id, then by lexicographically smallest path.
        """
        self._require(start)
        self._check_region(region)
        dist = self._distances_from(start)
        target = min(region.node_ids, key=lambda r: (dist[r], r))
        # Walk forward from start, always taking the smallest neighbor that
        # stays on some shortest path to the target; this yields the
        # lexicographically smallest among all minimum-length paths.
        to_target = self._distances_from(target)
        path = [start]
        node = start
        while node != target:
            candidates = [
                v
                for v, w in self._adj[node].items()
                if abs(w + to_target[v] - to_target[node]) <= _DIST_EPS
            ]
            node = min(candidates)
            path.append(node)
        return path

    def path_length(self, path: Sequence[NodeId]) -> float:
        """Total length of a node sequence; revisited edges accumulate."""
        if not path:
            raise GraphError("path must contain at least one node")
        total = 0.0
        self._require(path[0])
        for i in range(1, len(path)):
            a, b = path[i - 1], path[i]
            self._require(b)
            if b not in self._adj[a]:
                raise GraphError(
                    f"non-adjacent consecutive pair at index {i}: {a!r} -> {b!r}"
                )
            total += self._adj[a][b]
        return total

    def house_summary(self, region: GoalRegion) -> HouseSummary:
        """Per-room overview sorted by distance to the goal region.

        A room's distance is the minimum over its nodes' geodesics to the
        region, i.e. the distance from the room's nearest node.
        """
        self._check_region(region)
        room_nodes: dict[str, list[NodeId]] = {r: [] for r in self._rooms}
        for n, ann in self._annotations.items():
            room_nodes[ann.room_id].append(n)
        summaries = []
        for room in self._rooms.values():
            nodes = room_nodes[room.room_id]
            d = min(self.geodesic_to_region(n, region) for n in nodes) if nodes else math.inf
            summaries.append(
                RoomSummary(room.room_id, room.room_type, room.floor, room.objects, d)
            )
        summaries.sort(key=lambda s: (s.distance_to_goal, s.room_id))
        floors = {r.floor for r in self._rooms.values()}
        return HouseSummary(len(floors), len(self._rooms), tuple(summaries))

    def _check_region(self, region: GoalRegion) -> None:
        for r in region.node_ids:
            self._require(r)


# ------------------------------------------------------------------- loading


def _require_field(obj: dict, key: str, locus: str):
    if key not in obj:
        raise GraphError(f"{locus}: missing required field {key!r}")
    return obj[key]


def load_graph(source) -> EnvironmentGraph:
    """Load and validate a graph document (bytes, text, dict, or stream).

    Raises GraphError on malformed syntax, duplicate node ids, dangling
    edge endpoints, unresolvable rooms, or a disconnected graph; the error
    message names the offending node or edge.
    """
    doc = _read_document(source)
    scan_id = _require_field(doc, "scan_id", "graph")
    positions: dict[NodeId, Position] = {}
    annotations: dict[NodeId, NodeAnnotation] = {}
    rooms: dict[str, Room] = {}

    for raw in _require_field(doc, "rooms", "graph"):
        room_id = _require_field(raw, "room_id", "room")
        if room_id in rooms:
            raise GraphError(f"duplicate room id {room_id!r}")
        rooms[room_id] = Room(
            room_id=room_id,
            room_type=_require_field(raw, "room_type", f"room {room_id!r}"),
            floor=int(_require_field(raw, "floor", f"room {room_id!r}")),
            area=raw.get("area"),
            objects=tuple(raw.get("objects", ())),
        )

    for raw in _require_field(doc, "nodes", "graph"):
        node_id = _require_field(raw, "id", "node")
        if not node_id:
            raise GraphError("node with empty id")
        if node_id in positions:
            raise GraphError(f"duplicate node id {node_id!r}")
        locus = f"node {node_id!r}"
        pos = Position(
            float(_require_field(raw, "x", locus)),
            float(_require_field(raw, "y", locus)),
            float(_require_field(raw, "z", locus)),
        )
        if not all(math.isfinite(v) for v in (pos.x, pos.y, pos.z)):
            raise GraphError(f"{locus}: non-finite position")
        room_id = _require_field(raw, "room_id", locus)
        if room_id not in rooms:
            raise GraphError(f"{locus}: unresolvable room id {room_id!r}")
        positions[node_id] = pos
        annotations[node_id] = NodeAnnotation(
            room_id=room_id,
            caption=raw.get("caption"),
            objects=tuple(raw.get("objects", ())),
            image_ref=raw.get("image_ref"),
        )

    edges: list[EnvEdge] = []
    for i, raw in enumerate(_require_field(doc, "edges", "graph")):
        locus = f"edge #{i}"
        a = _require_field(raw, "a", locus)
        b = _require_field(raw, "b", locus)
        for endpoint in (a, b):
            if endpoint not in positions:
                raise GraphError(f"{locus}: dangling endpoint {endpoint!r}")
        if a == b:
            raise GraphError(f"{locus}: self-loop at {a!r}")
        euclid = positions[a].distance_to(positions[b])
        if "length" in raw:
            length = float(raw["length"])  # explicit override, taken as-is
        else:
            length = euclid
        if not length > 0:
            raise GraphError(f"{locus}: non-positive length {length}")
        edges.append(EnvEdge(a, b, length))

    if not positions:
        raise GraphError("graph has no nodes")
    graph = EnvironmentGraph(scan_id, positions, annotations, rooms, edges)
    _check_connected(graph)
    return graph


def _check_connected(graph: EnvironmentGraph) -> None:
    nodes = graph.node_ids
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        u = stack.pop()
        for v in graph.neighbors(u):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    missing = sorted(set(nodes) - seen)
    if missing:
        raise GraphError(f"graph is disconnected; unreachable nodes: {missing[:5]}")


def _read_document(source) -> dict:
    if isinstance(source, dict):
        return source
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    else:
        raise GraphError(f"unsupported graph source type: {type(source).__name__}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"malformed graph document: {exc}") from exc
    if not isinstance(doc, dict):
        raise GraphError("graph document must be a JSON object")
    return doc


def dump_graph(graph: EnvironmentGraph) -> dict:
    """Serialize a graph back to its document form."""
    return {
        "scan_id": graph.scan_id,
        "nodes": [
            {
                "id": n,
                "x": graph.position(n).x,
                "y": graph.position(n).y,
                "z": graph.position(n).z,
                "room_id": graph.annotation(n).room_id,
                "objects": list(graph.annotation(n).objects),
                **(
                    {"caption": graph.annotation(n).caption}
                    if graph.annotation(n).caption is not None
                    else {}
                ),
                **(
                    {"image_ref": graph.annotation(n).image_ref}
                    if graph.annotation(n).image_ref is not None
                    else {}
                ),
            }
            for n in graph.node_ids
        ],
        "rooms": [
            {
                "room_id": r.room_id,
                "room_type": r.room_type,
                "floor": r.floor,
                **({"area": r.area} if r.area is not None else {}),
                "objects": list(r.objects),
            }
            for r in sorted(graph.rooms.values(), key=lambda r: r.room_id)
        ],
        "edges": [
            {"a": e.a, "b": e.b, "length": e.length} for e in graph.edges
        ],
    }
