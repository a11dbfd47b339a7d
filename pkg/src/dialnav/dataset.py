"""Episode data model: parsing, validation, segmentation, and statistics.

The episode file format is a JSON document per episode (see README for the
field-by-field schema). A released archive with a different shape can be
ingested by passing an ``adapter`` callable that maps its raw document onto
the canonical one; all validation happens after adaptation.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .env_graph import (
    EnvironmentGraph,
    GoalRegion,
    GraphError,
    NodeId,
    load_graph,
)

SPLITS = ("train", "val_seen", "val_unseen", "test")


class EpisodeValidationError(ValueError):
    """Episode document violates the schema or a strict-mode invariant."""


@dataclass(frozen=True)
class DialogTurn:
    """One question-answer exchange, tied to the node where it occurred."""

    question: str
    answer: str
    node: NodeId
    estimated_node: Optional[NodeId] = None
    turn_index: int = 1  # 1-based


@dataclass(frozen=True)
class Episode:
    episode_id: str
    scan_id: str
    start: NodeId
    goal: GoalRegion
    instruction: str
    trajectory: tuple[NodeId, ...]
    dialog: tuple[DialogTurn, ...]
    split: str = "train"
    scores: Optional[dict] = None
    warnings: tuple[str, ...] = ()  # lenient-mode findings, not serialized


@dataclass(frozen=True)
class SegmentInstance:
    """A per-dialog-turn slice of an episode.

    An episode with M dialog turns yields M+1 instances: instance 0 holds
    the state before any dialog, instance k the state right after turn k.
    """

    episode_id: str
    scan_id: str
    instruction: str
    goal: GoalRegion
    trajectory_prefix: tuple[NodeId, ...]
    dialog_prefix: tuple[DialogTurn, ...]
    segment_index: int
    has_dialog: bool


@dataclass(frozen=True)
class LengthStats:
    minimum: float
    mean: float
    maximum: float
    mean_node_count: float


@dataclass(frozen=True)
class StatsReport:
    episode_count: int
    per_split_counts: dict[str, int]
    shortest_path: LengthStats
    human_trajectory: LengthStats
    mean_detour_ratio: float
    zero_shortest_count: int
    qa_histogram: dict[int, int]
    mean_qa_per_episode: float
    max_qa: int
    zero_dialog_count: int
    mean_question_words: float
    mean_answer_words: float


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    split: str


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    graph_dir: Path


# ------------------------------------------------------------------- parsing


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
        raise EpisodeValidationError(
            f"unsupported episode source type: {type(source).__name__}"
        )
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EpisodeValidationError(f"malformed episode document: {exc}") from exc
    if not isinstance(doc, dict):
        raise EpisodeValidationError("episode document must be a JSON object")
    return doc


def _require(doc: dict, key: str):
    if key not in doc:
        raise EpisodeValidationError(f"missing required field {key!r}")
    return doc[key]


def dialog_node_positions(
    trajectory: Sequence[NodeId], dialog: Sequence[DialogTurn]
) -> list[Optional[int]]:
    """Greedy 0-based trajectory index for each dialog turn's node.

    Turn nodes must appear in the trajectory at non-decreasing positions
    (a turn happens at the last visited node at that moment). Returns None
    at positions where no consistent index exists.
    """
    positions: list[Optional[int]] = []
    cursor = 0
    for turn in dialog:
        found = None
        for i in range(cursor, len(trajectory)):
            if trajectory[i] == turn.node:
                found = i
                break
        positions.append(found)
        if found is not None:
            cursor = found
    return positions


def parse_episode(
    source,
    g: EnvironmentGraph,
    strict: bool = True,
    adapter: Optional[Callable[[dict], dict]] = None,
) -> Episode:
    """Parse and validate one episode against its scan graph.

    In strict mode every invariant failure raises; lenient mode downgrades
    "last node in goal" and "turn node consistent with trajectory" to
    warnings recorded on the returned Episode.
    """
    doc = _read_document(source)
    if adapter is not None:
        doc = adapter(doc)

    warnings: list[str] = []

    def fail(msg: str, soft: bool = False):
        if strict or not soft:
            raise EpisodeValidationError(msg)
        warnings.append(msg)

    episode_id = str(_require(doc, "episode_id"))
    scan_id = str(_require(doc, "scan"))
    if scan_id != g.scan_id:
        raise EpisodeValidationError(
            f"episode scan {scan_id!r} does not match graph {g.scan_id!r}"
        )
    split = doc.get("split", "train")
    if split not in SPLITS:
        raise EpisodeValidationError(f"unknown split {split!r}")

    start = str(_require(doc, "start_node"))
    goal_doc = _require(doc, "goal")
    goal_nodes = list(_require(goal_doc, "nodes"))
    if not goal_nodes:
        raise EpisodeValidationError("goal.nodes must be non-empty")
    for n in [start, *goal_nodes]:
        if n not in g:
            raise EpisodeValidationError(f"unknown node id {n!r}")
    goal = GoalRegion(frozenset(goal_nodes), goal_doc.get("room"))

    trajectory = [str(n) for n in _require(doc, "trajectory")]
    if not trajectory:
        raise EpisodeValidationError("trajectory must be non-empty")
    if trajectory[0] != start:
        raise EpisodeValidationError(
            f"trajectory must begin at start node {start!r}, got {trajectory[0]!r}"
        )
    for i, n in enumerate(trajectory):
        if n not in g:
            raise EpisodeValidationError(f"unknown trajectory node {n!r} at index {i}")
    for i in range(1, len(trajectory)):
        a, b = trajectory[i - 1], trajectory[i]
        if b not in g.neighbors(a):
            raise EpisodeValidationError(
                f"non-adjacent trajectory step at index {i}: {a!r} -> {b!r}"
            )
    if trajectory[-1] not in goal.node_ids:
        fail(
            f"trajectory ends at {trajectory[-1]!r}, outside the goal region",
            soft=True,
        )

    dialog: list[DialogTurn] = []
    for i, raw in enumerate(doc.get("dialog", [])):
        question = _require(raw, "question")
        if not question:
            raise EpisodeValidationError(f"dialog turn {i + 1}: empty question")
        node = str(_require(raw, "node"))
        if node not in g:
            raise EpisodeValidationError(f"dialog turn {i + 1}: unknown node {node!r}")
        estimated = raw.get("estimated_node")
        if estimated is not None and estimated not in g:
            raise EpisodeValidationError(
                f"dialog turn {i + 1}: unknown estimated node {estimated!r}"
            )
        dialog.append(
            DialogTurn(
                question=question,
                answer=raw.get("answer", ""),
                node=node,
                estimated_node=estimated,
                turn_index=int(raw.get("turn_index", i + 1)),
            )
        )
    for i in range(1, len(dialog)):
        if dialog[i].turn_index <= dialog[i - 1].turn_index:
            raise EpisodeValidationError("dialog turn indices must strictly increase")

    for i, pos in enumerate(dialog_node_positions(trajectory, dialog)):
        if pos is None:
            fail(
                f"dialog turn {i + 1} at node {dialog[i].node!r} is inconsistent "
                f"with the trajectory order",
                soft=True,
            )

    return Episode(
        episode_id=episode_id,
        scan_id=scan_id,
        start=start,
        goal=goal,
        instruction=str(_require(doc, "instruction")),
        trajectory=tuple(trajectory),
        dialog=tuple(dialog),
        split=split,
        scores=doc.get("scores"),
        warnings=tuple(warnings),
    )


def serialize_episode(e: Episode) -> dict:
    doc = {
        "episode_id": e.episode_id,
        "scan": e.scan_id,
        "split": e.split,
        "start_node": e.start,
        "goal": {"nodes": sorted(e.goal.node_ids)},
        "instruction": e.instruction,
        "trajectory": list(e.trajectory),
        "dialog": [
            {
                "question": t.question,
                "answer": t.answer,
                "node": t.node,
                **(
                    {"estimated_node": t.estimated_node}
                    if t.estimated_node is not None
                    else {}
                ),
                "turn_index": t.turn_index,
            }
            for t in e.dialog
        ],
    }
    if e.goal.region_room_id is not None:
        doc["goal"]["room"] = e.goal.region_room_id
    if e.scores is not None:
        doc["scores"] = e.scores
    return doc


# -------------------------------------------------------------- segmentation


def to_segments(e: Episode) -> list[SegmentInstance]:
    """Restructure an episode into per-dialog-turn segment instances.

    An episode with M dialog turns yields exactly M+1 instances; instance 0
    ends at the start node with no dialog, instance k ends at the node of
    dialog turn k and carries the first k turns.
    """
    positions = dialog_node_positions(e.trajectory, e.dialog)
    segments = [
        SegmentInstance(
            episode_id=e.episode_id,
            scan_id=e.scan_id,
            instruction=e.instruction,
            goal=e.goal,
            trajectory_prefix=(e.start,),
            dialog_prefix=(),
            segment_index=0,
            has_dialog=False,
        )
    ]
    for k, turn in enumerate(e.dialog, start=1):
        pos = positions[k - 1]
        if pos is None:
            # Lenient-mode episode whose turn node never appears at a
            # consistent trajectory position; anchor at its last occurrence.
            occurrences = [i for i, n in enumerate(e.trajectory) if n == turn.node]
            pos = occurrences[-1] if occurrences else 0
        segments.append(
            SegmentInstance(
                episode_id=e.episode_id,
                scan_id=e.scan_id,
                instruction=e.instruction,
                goal=e.goal,
                trajectory_prefix=e.trajectory[: pos + 1],
                dialog_prefix=e.dialog[:k],
                segment_index=k,
                has_dialog=True,
            )
        )
    return segments


def serialize_segment(s: SegmentInstance) -> dict:
    return {
        "episode_id": s.episode_id,
        "scan": s.scan_id,
        "segment_index": s.segment_index,
        "instruction": s.instruction,
        "goal": {
            "nodes": sorted(s.goal.node_ids),
            **({"room": s.goal.region_room_id} if s.goal.region_room_id else {}),
        },
        "trajectory_prefix": list(s.trajectory_prefix),
        "dialog_prefix": [
            {
                "question": t.question,
                "answer": t.answer,
                "node": t.node,
                **(
                    {"estimated_node": t.estimated_node}
                    if t.estimated_node is not None
                    else {}
                ),
                "turn_index": t.turn_index,
            }
            for t in s.dialog_prefix
        ],
        "has_dialog": s.has_dialog,
    }


# ---------------------------------------------------------------- statistics


def _word_count(text: str) -> int:
    return len(text.split())


def compute_statistics(
    episodes: Iterable[Episode],
    graphs: Mapping[str, EnvironmentGraph] | Callable[[str], EnvironmentGraph],
) -> StatsReport:
    """Dataset-level statistics over a set of episodes.

    Words are counted by whitespace tokenization. The detour ratio is the
    human trajectory length divided by the shortest-path-to-region length
    from the start; episodes whose shortest length is zero are excluded
    from the ratio mean and counted separately.
    """
    lookup = graphs if callable(graphs) else graphs.__getitem__
    eps = sorted(episodes, key=lambda e: e.episode_id)
    if not eps:
        raise ValueError("no episodes to summarize")

    per_split = {s: 0 for s in SPLITS}
    shortest_lengths: list[float] = []
    shortest_nodes: list[int] = []
    human_lengths: list[float] = []
    human_nodes: list[int] = []
    detours: list[float] = []
    zero_shortest = 0
    qa_hist: dict[int, int] = {}
    q_words: list[int] = []
    a_words: list[int] = []

    for e in eps:
        try:
            g = lookup(e.scan_id)
        except KeyError:
            raise GraphError(f"missing graph for scan {e.scan_id!r}") from None
        per_split[e.split] = per_split.get(e.split, 0) + 1

        sp = g.shortest_path_to_region(e.start, e.goal)
        sp_len = g.path_length(sp)
        shortest_lengths.append(sp_len)
        shortest_nodes.append(len(sp))
        human_len = g.path_length(e.trajectory)
        human_lengths.append(human_len)
        human_nodes.append(len(e.trajectory))
        if sp_len > 0:
            detours.append(human_len / sp_len)
        else:
            zero_shortest += 1

        m = len(e.dialog)
        qa_hist[m] = qa_hist.get(m, 0) + 1
        for t in e.dialog:
            q_words.append(_word_count(t.question))
            a_words.append(_word_count(t.answer))

    def mean(xs):
        return sum(xs) / len(xs) if xs else 0.0

    return StatsReport(
        episode_count=len(eps),
        per_split_counts=per_split,
        shortest_path=LengthStats(
            min(shortest_lengths), mean(shortest_lengths), max(shortest_lengths),
            mean(shortest_nodes),
        ),
        human_trajectory=LengthStats(
            min(human_lengths), mean(human_lengths), max(human_lengths),
            mean(human_nodes),
        ),
        mean_detour_ratio=mean(detours),
        zero_shortest_count=zero_shortest,
        qa_histogram=dict(sorted(qa_hist.items())),
        mean_qa_per_episode=mean([len(e.dialog) for e in eps]),
        max_qa=max(len(e.dialog) for e in eps),
        zero_dialog_count=sum(1 for e in eps if not e.dialog),
        mean_question_words=mean(q_words),
        mean_answer_words=mean(a_words),
    )


# ------------------------------------------------------------------ manifest


def load_manifest(source, base_dir: Optional[Path] = None) -> DatasetManifest:
    """Load a dataset manifest; relative paths resolve against base_dir."""
    if isinstance(source, (str, Path)) and Path(source).exists():
        path = Path(source)
        doc = json.loads(path.read_text())
        base_dir = base_dir or path.parent
    else:
        doc = _read_document(source)
        base_dir = base_dir or Path(".")
    entries = []
    for raw in doc.get("episodes", []):
        split = raw.get("split", "train")
        if split not in SPLITS:
            raise EpisodeValidationError(f"manifest entry has unknown split {split!r}")
        entries.append(ManifestEntry(base_dir / raw["path"], split))
    graph_dir = base_dir / _require(doc, "graph_dir")
    return DatasetManifest(tuple(entries), graph_dir)


class GraphStore:
    """Loads and caches scan graphs from a directory of <scan_id>.json files."""

    def __init__(self, graph_dir: Path):
        self.graph_dir = Path(graph_dir)
        self._cache: dict[str, EnvironmentGraph] = {}

    def __call__(self, scan_id: str) -> EnvironmentGraph:
        if scan_id not in self._cache:
            path = self.graph_dir / f"{scan_id}.json"
            if not path.exists():
                raise KeyError(scan_id)
            self._cache[scan_id] = load_graph(path.read_text())
        return self._cache[scan_id]


def load_episodes(
    manifest: DatasetManifest,
    strict: bool = True,
    split_filter: Optional[str] = None,
    adapter: Optional[Callable[[dict], dict]] = None,
) -> list[Episode]:
    """Load every episode in the manifest, validated against its graph."""
    store = GraphStore(manifest.graph_dir)
    episodes = []
    for entry in manifest.entries:
        if split_filter is not None and entry.split != split_filter:
            continue
        if not entry.path.exists():
            raise EpisodeValidationError(f"unresolvable manifest entry: {entry.path}")
        doc = _read_document(entry.path.read_text())
        if adapter is not None:
            doc = adapter(doc)
        doc["split"] = entry.split  # manifest split is authoritative
        e = parse_episode(doc, store(str(doc.get("scan"))), strict=strict)
        episodes.append(e)
    return sorted(episodes, key=lambda e: e.episode_id)


@dataclass(frozen=True)
class SplitTableRow:
    episodes: int
    segments: int
    segments_with_dialog: int


def split_table(
    manifest: DatasetManifest, strict: bool = False
) -> dict[str, SplitTableRow]:
    """Per-split counts of episodes, segment instances, and dialog-bearing
    segments, plus a 'total' row."""
    counts = {s: [0, 0, 0] for s in (*SPLITS, "total")}
    for e in load_episodes(manifest, strict=strict):
        segs = to_segments(e)
        with_dialog = sum(1 for s in segs if s.has_dialog)
        for key in (e.split, "total"):
            counts[key][0] += 1
            counts[key][1] += len(segs)
            counts[key][2] += with_dialog
    return {k: SplitTableRow(*v) for k, v in counts.items()}
