"""Per-episode and aggregate evaluation metrics.

Navigation error and goal progress use geodesic graph distance (the
traversable-distance convention); localization error uses straight-line
Euclidean distance with a 3 m accuracy margin. Each report records which
convention produced its numbers so sensitivity checks stay possible.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .env_graph import EnvironmentGraph, GoalRegion, NodeId

LOCALIZATION_MARGIN_M = 3.0

DISTANCE_CONVENTIONS = {
    "nav_error": "geodesic",
    "goal_progress": "geodesic",
    "localization_error": "euclidean",
}


@dataclass(frozen=True)
class LocalizationRecord:
    turn_index: int
    true_node: NodeId
    estimated_node: NodeId


@dataclass(frozen=True)
class EpisodeOutcome:
    """The finalized record of one episode run, as metrics consume it."""

    episode_id: str
    scan_id: str
    start: NodeId
    goal: GoalRegion
    visited: tuple[NodeId, ...]  # full realized trajectory including revisits
    stopped: bool  # agent issued stop (vs budget exhaustion)
    dialog_turns: int
    localization_records: tuple[LocalizationRecord, ...] = ()
    tags: tuple[str, ...] = ()  # e.g. "disconnect" for aborted remote runs


@dataclass(frozen=True)
class MetricReport:
    episode_id: str
    success: int
    oracle_success: int
    spl: float
    nav_error: float
    nsc: int
    dtc: int
    le_mean: Optional[float]
    le_accuracy_at_3m: Optional[float]
    goal_progress: float
    distance_conventions: dict = field(default_factory=lambda: dict(DISTANCE_CONVENTIONS))


@dataclass(frozen=True)
class MetricSummary:
    """Aggregate row: SR/OSR/SPL as percentages, distances as mean meters."""

    episodes: int
    sr: float
    osr: float
    spl: float
    ne: float
    nsc: float
    dtc: float
    le: Optional[float]
    le_accuracy_at_3m: Optional[float]
    gp: float


def score_episode(o: EpisodeOutcome, g: EnvironmentGraph) -> MetricReport:
    """Compute the full per-episode metric set.

    Success requires an explicit stop inside the goal region; passing
    through the region counts toward oracle success only. SPL weighs
    success by shortest/realized length; when the start is already in the
    goal region (shortest length 0) SPL is defined as success itself.
    """
    if not o.visited:
        raise ValueError("outcome has no visited nodes")
    last = o.visited[-1]
    success = 1 if (o.stopped and last in o.goal.node_ids) else 0
    oracle = 1 if any(n in o.goal.node_ids for n in o.visited) else 0
    optimal = g.geodesic_to_region(o.start, o.goal)
    realized = g.path_length(o.visited)
    if optimal == 0.0:
        spl = float(success)
    else:
        spl = success * optimal / max(realized, optimal)
    final_dist = g.geodesic_to_region(last, o.goal)
    le_mean, le_acc = localization_error(o.localization_records, g)
    return MetricReport(
        episode_id=o.episode_id,
        success=success,
        oracle_success=oracle,
        spl=spl,
        nav_error=final_dist,
        nsc=len(o.visited) - 1,
        dtc=o.dialog_turns,
        le_mean=le_mean,
        le_accuracy_at_3m=le_acc,
        goal_progress=optimal - final_dist,
    )


def localization_error(
    records: Sequence[LocalizationRecord], g: EnvironmentGraph
) -> tuple[Optional[float], Optional[float]]:
    """Mean Euclidean localization error and accuracy within the 3 m margin.

    Returns (None, None) for an empty record list.
    """
    if not records:
        return None, None
    errors = [g.euclidean_distance(r.true_node, r.estimated_node) for r in records]
    mean = sum(errors) / len(errors)
    acc = sum(1 for e in errors if e <= LOCALIZATION_MARGIN_M) / len(errors)
    return mean, acc


def aggregate(reports: Sequence[MetricReport]) -> MetricSummary:
    """Order-independent means over per-episode reports.

    SR, OSR, SPL, and A@3 are reported as percentages; LE averages only
    over episodes that have localization records.
    """
    if not reports:
        raise ValueError("cannot aggregate an empty report list")
    n = len(reports)
    les = [r.le_mean for r in reports if r.le_mean is not None]
    accs = [r.le_accuracy_at_3m for r in reports if r.le_accuracy_at_3m is not None]
    return MetricSummary(
        episodes=n,
        sr=100.0 * sum(r.success for r in reports) / n,
        osr=100.0 * sum(r.oracle_success for r in reports) / n,
        spl=100.0 * sum(r.spl for r in reports) / n,
        ne=sum(r.nav_error for r in reports) / n,
        nsc=sum(r.nsc for r in reports) / n,
        dtc=sum(r.dtc for r in reports) / n,
        le=sum(les) / len(les) if les else None,
        le_accuracy_at_3m=100.0 * sum(accs) / len(accs) if accs else None,
        gp=sum(r.goal_progress for r in reports) / n,
    )


CSV_COLUMNS = ["episode_id", "SR", "OSR", "SPL", "NE", "NSC", "DTC", "LE", "GP"]


def report_to_row(r: MetricReport) -> list:
    return [
        r.episode_id,
        r.success,
        r.oracle_success,
        f"{r.spl:.6f}",
        f"{r.nav_error:.6f}",
        r.nsc,
        r.dtc,
        "" if r.le_mean is None else f"{r.le_mean:.6f}",
        f"{r.goal_progress:.6f}",
    ]


def reports_to_csv(reports: Sequence[MetricReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in sorted(reports, key=lambda r: r.episode_id):
        writer.writerow(report_to_row(r))
    return buf.getvalue()


def report_to_record(r: MetricReport) -> dict:
    """Structured-text (JSON-ready) form of a per-episode report."""
    return {
        "episode_id": r.episode_id,
        "success": r.success,
        "oracle_success": r.oracle_success,
        "spl": r.spl,
        "nav_error": r.nav_error,
        "nsc": r.nsc,
        "dtc": r.dtc,
        "le_mean": r.le_mean,
        "le_accuracy_at_3m": r.le_accuracy_at_3m,
        "goal_progress": r.goal_progress,
        "distance_conventions": r.distance_conventions,
    }


def summary_to_record(s: MetricSummary) -> dict:
    return {
        "episodes": s.episodes,
        "SR": s.sr,
        "OSR": s.osr,
        "SPL": s.spl,
        "NE": s.ne,
        "NSC": s.nsc,
        "DTC": s.dtc,
        "LE": s.le,
        "A@3": s.le_accuracy_at_3m,
        "GP": s.gp,
    }
