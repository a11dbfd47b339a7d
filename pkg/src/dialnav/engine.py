"""Deterministic turn-taking engine for one dialog-navigation episode.

The Navigator moves, asks, stops, or (in interactive mode) guesses; each
question routes through the Guide's localize-then-answer sequence before
the Navigator may act again. All transitions are pure: every operation
returns a fresh state, so a rejected action can never leave partial
mutations behind. The event log is append-only and replayable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence, Union

from .env_graph import EnvironmentGraph, GoalRegion, NodeId
from .metrics import EpisodeOutcome, LocalizationRecord


class EngineError(ValueError):
    """An action the engine rejects; the prior state remains valid."""


class PhaseError(EngineError):
    """Action arrived in a phase that does not accept it."""


class Phase(Enum):
    NAVIGATOR_TURN = "navigator_turn"
    AWAIT_LOCALIZATION = "await_localization"
    AWAIT_ANSWER = "await_answer"
    TERMINAL = "terminal"


@dataclass(frozen=True)
class EngineConfig:
    max_nav_steps: int = 80
    max_dialog_turns: int = 20
    interactive_guess_mode: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.max_nav_steps < 1 or self.max_dialog_turns < 1:
            raise ValueError("budgets must be >= 1")


@dataclass(frozen=True)
class EpisodeTask:
    """The static task definition (G, b, R, I)."""

    episode_id: str
    graph: EnvironmentGraph
    start: NodeId
    goal: GoalRegion
    instruction: str


# Navigator actions
@dataclass(frozen=True)
class Move:
    node: NodeId


@dataclass(frozen=True)
class Ask:
    text: str


@dataclass(frozen=True)
class Stop:
    pass


@dataclass(frozen=True)
class Guess:
    pass


Action = Union[Move, Ask, Stop, Guess]


@dataclass(frozen=True)
class EngineEvent:
    seq: int
    kind: str  # start | move | ask | localize | answer | guess | stop | budget_stop
    payload: dict


@dataclass(frozen=True)
class FinalizedTurn:
    question: str
    answer: str
    node: NodeId
    estimated_node: Optional[NodeId]
    turn_index: int


@dataclass(frozen=True)
class EpisodeState:
    task: EpisodeTask
    config: EngineConfig
    current_node: NodeId
    visited: tuple[NodeId, ...]
    dialog: tuple[FinalizedTurn, ...]
    phase: Phase
    nav_steps_used: int
    dialog_turns_used: int
    pending_question: Optional[str]
    pending_estimate: Optional[NodeId]
    localization_records: tuple[LocalizationRecord, ...]
    event_log: tuple[EngineEvent, ...]
    stopped: bool = False  # explicit stop or correct guess (vs budget/abort)
    termination_tags: tuple[str, ...] = ()

    def _logged(self, kind: str, payload: dict) -> tuple[EngineEvent, ...]:
        return (*self.event_log, EngineEvent(len(self.event_log), kind, payload))


def start_episode(task: EpisodeTask, config: Optional[EngineConfig] = None) -> EpisodeState:
    """Initialize an episode: Navigator's turn at the start node."""
    config = config or EngineConfig()
    g = task.graph
    if task.start not in g:
        raise EngineError(f"task start node {task.start!r} not in graph")
    for n in task.goal.node_ids:
        if n not in g:
            raise EngineError(f"task goal node {n!r} not in graph")
    start_event = EngineEvent(
        0,
        "start",
        {
            "episode_id": task.episode_id,
            "scan_id": g.scan_id,
            "start": task.start,
            "goal_nodes": sorted(task.goal.node_ids),
            "goal_room": task.goal.region_room_id,
            "instruction": task.instruction,
            "config": {
                "max_nav_steps": config.max_nav_steps,
                "max_dialog_turns": config.max_dialog_turns,
                "interactive_guess_mode": config.interactive_guess_mode,
                "seed": config.seed,
            },
        },
    )
    return EpisodeState(
        task=task,
        config=config,
        current_node=task.start,
        visited=(task.start,),
        dialog=(),
        phase=Phase.NAVIGATOR_TURN,
        nav_steps_used=0,
        dialog_turns_used=0,
        pending_question=None,
        pending_estimate=None,
        localization_records=(),
        event_log=(start_event,),
    )


def navigator_step(state: EpisodeState, action: Action) -> EpisodeState:
    """Apply one Navigator action.

    Move appends an adjacent node (terminating with budget_stop if this
    exhausts the step budget); Ask opens a dialog turn and hands control to
    the Guide; Stop terminates; Guess (interactive mode only) terminates on
    a correct guess and is merely logged otherwise.
    """
    if state.phase is not Phase.NAVIGATOR_TURN:
        raise PhaseError(f"navigator action in phase {state.phase.value}")

    if isinstance(action, Move):
        g = state.task.graph
        if action.node not in g.neighbors(state.current_node):
            raise EngineError(
                f"move target {action.node!r} is not adjacent to {state.current_node!r}"
            )
        nxt = replace(
            state,
            current_node=action.node,
            visited=(*state.visited, action.node),
            nav_steps_used=state.nav_steps_used + 1,
            event_log=state._logged("move", {"node": action.node}),
        )
        if nxt.nav_steps_used >= nxt.config.max_nav_steps:
            return replace(
                nxt,
                phase=Phase.TERMINAL,
                event_log=nxt._logged("budget_stop", {"reason": "nav_budget"}),
            )
        return nxt

    if isinstance(action, Ask):
        if not action.text:
            raise EngineError("question text must be non-empty")
        if state.dialog_turns_used >= state.config.max_dialog_turns:
            raise EngineError("dialog turn budget exhausted")
        return replace(
            state,
            phase=Phase.AWAIT_LOCALIZATION,
            pending_question=action.text,
            event_log=state._logged(
                "ask", {"text": action.text, "node": state.current_node}
            ),
        )

    if isinstance(action, Stop):
        return replace(
            state,
            phase=Phase.TERMINAL,
            stopped=True,
            event_log=state._logged("stop", {"node": state.current_node}),
        )

    if isinstance(action, Guess):
        if not state.config.interactive_guess_mode:
            raise EngineError("guess is only available in interactive mode")
        correct = state.current_node in state.task.goal.node_ids
        logged = state._logged(
            "guess", {"node": state.current_node, "correct": correct}
        )
        if correct:
            return replace(
                state, phase=Phase.TERMINAL, stopped=True, event_log=logged
            )
        return replace(state, event_log=logged)

    raise EngineError(f"unknown action type: {type(action).__name__}")


def guide_localize(state: EpisodeState, estimate: NodeId) -> EpisodeState:
    """Record the Guide's location estimate; the true node is never revealed."""
    if state.phase is not Phase.AWAIT_LOCALIZATION:
        raise PhaseError(f"localize in phase {state.phase.value}")
    if estimate not in state.task.graph:
        raise EngineError(f"estimate {estimate!r} not in graph")
    record = LocalizationRecord(
        turn_index=state.dialog_turns_used + 1,
        true_node=state.current_node,
        estimated_node=estimate,
    )
    return replace(
        state,
        phase=Phase.AWAIT_ANSWER,
        pending_estimate=estimate,
        localization_records=(*state.localization_records, record),
        event_log=state._logged("localize", {"estimate": estimate}),
    )


def guide_answer(state: EpisodeState, answer: str) -> EpisodeState:
    """Finalize the pending dialog turn and return control to the Navigator."""
    if state.phase is not Phase.AWAIT_ANSWER:
        raise PhaseError(f"answer in phase {state.phase.value}")
    if not answer:
        raise EngineError("answer text must be non-empty")
    turn = FinalizedTurn(
        question=state.pending_question or "",
        answer=answer,
        node=state.current_node,
        estimated_node=state.pending_estimate,
        turn_index=state.dialog_turns_used + 1,
    )
    return replace(
        state,
        phase=Phase.NAVIGATOR_TURN,
        dialog=(*state.dialog, turn),
        dialog_turns_used=state.dialog_turns_used + 1,
        pending_question=None,
        pending_estimate=None,
        event_log=state._logged("answer", {"text": answer}),
    )


def abort(state: EpisodeState, reason: str) -> EpisodeState:
    """Force-terminate (e.g. remote disconnect); never counts as a stop."""
    if state.phase is Phase.TERMINAL:
        return state
    return replace(
        state,
        phase=Phase.TERMINAL,
        termination_tags=(*state.termination_tags, reason),
        event_log=state._logged("budget_stop", {"reason": reason}),
    )


def finalize(state: EpisodeState) -> EpisodeOutcome:
    """Convert a terminal state into the record the metrics consume."""
    if state.phase is not Phase.TERMINAL:
        raise PhaseError("finalize called before the episode terminated")
    return EpisodeOutcome(
        episode_id=state.task.episode_id,
        scan_id=state.task.graph.scan_id,
        start=state.task.start,
        goal=state.task.goal,
        visited=state.visited,
        stopped=state.stopped,
        dialog_turns=state.dialog_turns_used,
        localization_records=state.localization_records,
        tags=state.termination_tags,
    )


# ------------------------------------------------------------------ replay


def serialize_event_log(events: Sequence[EngineEvent]) -> str:
    """One JSON object per line, in sequence order."""
    return "".join(
        json.dumps({"seq": e.seq, "kind": e.kind, "payload": e.payload}, sort_keys=True)
        + "\n"
        for e in events
    )


def parse_event_log(text: str) -> list[EngineEvent]:
    events = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        doc = json.loads(line)
        events.append(EngineEvent(doc["seq"], doc["kind"], doc["payload"]))
    if not events or events[0].kind != "start":
        raise EngineError("event log must begin with a start event")
    for i, e in enumerate(events):
        if e.seq != i:
            raise EngineError(f"event sequence gap at {i} (got seq {e.seq})")
    return events


def replay_events(events: Sequence[EngineEvent], graph: EnvironmentGraph) -> EpisodeState:
    """Re-drive a fresh engine from a logged run; yields an identical outcome."""
    head = events[0]
    if head.kind != "start":
        raise EngineError("event log must begin with a start event")
    p = head.payload
    task = EpisodeTask(
        episode_id=p["episode_id"],
        graph=graph,
        start=p["start"],
        goal=GoalRegion(frozenset(p["goal_nodes"]), p.get("goal_room")),
        instruction=p["instruction"],
    )
    cfg = p["config"]
    state = start_episode(
        task,
        EngineConfig(
            max_nav_steps=cfg["max_nav_steps"],
            max_dialog_turns=cfg["max_dialog_turns"],
            interactive_guess_mode=cfg["interactive_guess_mode"],
            seed=cfg["seed"],
        ),
    )
    for e in events[1:]:
        if e.kind == "move":
            state = navigator_step(state, Move(e.payload["node"]))
        elif e.kind == "ask":
            state = navigator_step(state, Ask(e.payload["text"]))
        elif e.kind == "localize":
            state = guide_localize(state, e.payload["estimate"])
        elif e.kind == "answer":
            state = guide_answer(state, e.payload["text"])
        elif e.kind == "stop":
            state = navigator_step(state, Stop())
        elif e.kind == "guess":
            state = navigator_step(state, Guess())
        elif e.kind == "budget_stop":
            if e.payload.get("reason") == "nav_budget":
                # emitted automatically by the budget-exhausting move
                if state.phase is not Phase.TERMINAL:
                    raise EngineError("budget_stop event without exhausted budget")
            else:
                state = abort(state, e.payload.get("reason", "abort"))
        else:
            raise EngineError(f"unknown event kind {e.kind!r}")
    return state
