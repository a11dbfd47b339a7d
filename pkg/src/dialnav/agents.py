"""Built-in non-neural policies: navigators, whether-to-ask strategies,
template question/answer generation, lexical localization, and scripted
replay of recorded episodes. Enough to run the full loop end-to-end and
reproduce the non-neural baseline rows.

All stochastic policies take an explicit random.Random so rollouts are
exactly reproducible from (seed, task).
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

from . import engine
from .dataset import Episode, dialog_node_positions
from .engine import (
    Action,
    Ask,
    EngineConfig,
    EpisodeState,
    EpisodeTask,
    Move,
    Phase,
    Stop,
)
from .env_graph import EnvironmentGraph, GoalRegion, NodeId

_PROB_EPS = 1e-9
_TOKEN_RE = re.compile(r"[a-z0-9']+")


@dataclass(frozen=True)
class ActionDistribution:
    """Normalized distribution over Move/Stop actions."""

    entries: tuple[tuple[Action, float], ...]

    def __post_init__(self):
        total = sum(p for _, p in self.entries)
        if any(p < 0 for _, p in self.entries):
            raise ValueError("probabilities must be nonnegative")
        if abs(total - 1.0) > _PROB_EPS:
            raise ValueError(f"probabilities must sum to 1, got {total}")

    def max_probability(self) -> float:
        return max(p for _, p in self.entries)

    def argmax(self) -> Action:
        # Deterministic tie-break: Stop sorts before moves, moves by node id.
        def key(entry):
            action, p = entry
            rank = ("", "") if isinstance(action, Stop) else ("move", action.node)
            return (-p, rank)

        return min(self.entries, key=key)[0]

    def sample(self, rng: random.Random) -> Action:
        x = rng.random()
        acc = 0.0
        for action, p in self.entries:
            acc += p
            if x < acc:
                return action
        return self.entries[-1][0]

    def entropy(self) -> float:
        return -sum(p * math.log(p) for _, p in self.entries if p > 0)


@dataclass(frozen=True)
class Observation:
    """What the Navigator sees: its node, the local neighborhood, the task
    hint, and the dialog so far. Never the goal region."""

    current: NodeId
    neighbors: tuple[NodeId, ...]
    room_type: Optional[str]
    objects: tuple[str, ...]
    caption: Optional[str]
    instruction: str
    dialog: tuple = ()


def observe(graph: EnvironmentGraph, state: EpisodeState) -> Observation:
    ann = graph.annotation(state.current_node)
    room = graph.rooms.get(ann.room_id)
    return Observation(
        current=state.current_node,
        neighbors=tuple(graph.neighbors(state.current_node)),
        room_type=room.room_type if room else None,
        objects=ann.objects,
        caption=ann.caption,
        instruction=state.task.instruction,
        dialog=state.dialog,
    )


# ------------------------------------------------------------- navigators


def oracle_navigator_act(
    graph: EnvironmentGraph, current: NodeId, goal: GoalRegion
) -> ActionDistribution:
    """Probability 1 on the next hop of the shortest path to the region;
    Stop with probability 1 once inside it."""
    if current in goal.node_ids:
        return ActionDistribution(((Stop(), 1.0),))
    path = graph.shortest_path_to_region(current, goal)
    return ActionDistribution(((Move(path[1]), 1.0),))


def random_navigator_act(
    graph: EnvironmentGraph, current: NodeId, rng: random.Random
) -> ActionDistribution:
    """Uniform over neighbors plus Stop, Stop weighted like one neighbor."""
    neighbors = graph.neighbors(current)
    n = len(neighbors) + 1
    entries: list[tuple[Action, float]] = [(Move(v), 1.0 / n) for v in neighbors]
    entries.append((Stop(), 1.0 / n))
    return ActionDistribution(tuple(entries))


class NavigatorPolicy(Protocol):
    def act(self, graph: EnvironmentGraph, obs: Observation) -> ActionDistribution: ...


class OracleNavigator:
    """Follows the true shortest path; needs the goal, so it models the
    upper-bound row, not a fair agent."""

    def __init__(self, goal: GoalRegion):
        self.goal = goal

    def act(self, graph: EnvironmentGraph, obs: Observation) -> ActionDistribution:
        return oracle_navigator_act(graph, obs.current, self.goal)


class RandomNavigator:
    def __init__(self, rng: random.Random):
        self.rng = rng

    def act(self, graph: EnvironmentGraph, obs: Observation) -> ActionDistribution:
        return random_navigator_act(graph, obs.current, self.rng)


# ------------------------------------------------------------ whether-to-ask


@dataclass
class WtaConfig:
    """Whether-to-ask strategy plus its per-episode counter state.

    strategy: never | always | fixed_interval | confidence_threshold | external
    confidence_stat: max_prob (default) or entropy (normalized; confidence
    is 1 - H/H_max).
    """

    strategy: str = "never"
    k: int = 1
    tau: float = 0.5
    confidence_stat: str = "max_prob"
    steps_since_last_dialog: int = 0

    def __post_init__(self):
        if self.strategy not in (
            "never", "always", "fixed_interval", "confidence_threshold", "external",
        ):
            raise ValueError(f"unknown WTA strategy {self.strategy!r}")
        if self.k < 1:
            raise ValueError("fixed-interval k must be >= 1")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("confidence threshold tau must be in [0, 1]")

    def note_move(self) -> None:
        self.steps_since_last_dialog += 1

    def note_answer(self) -> None:
        # Resets on answered turns, not on asks: a slow Guide must not
        # cause an ask storm.
        self.steps_since_last_dialog = 0


def _confidence(config: WtaConfig, dist: ActionDistribution) -> float:
    if config.confidence_stat == "entropy":
        n = len(dist.entries)
        if n <= 1:
            return 1.0
        return 1.0 - dist.entropy() / math.log(n)
    return dist.max_probability()


def wta_decide(config: WtaConfig, dist: ActionDistribution) -> bool:
    """Should the Navigator interrupt navigation with a question now?"""
    if config.strategy == "never":
        return False
    if config.strategy == "always":
        return True
    if config.strategy == "fixed_interval":
        return config.steps_since_last_dialog >= config.k
    if config.strategy == "confidence_threshold":
        return _confidence(config, dist) < config.tau
    return False  # external: a remote agent supplies the ask directly


# ------------------------------------------------------------- guide side


def template_question(obs: Observation) -> str:
    """Deterministic surroundings description, at most five objects."""
    if not obs.room_type:
        return "I'm not sure where I am."
    if obs.objects:
        listed = ", ".join(obs.objects[:5])
        return f"I'm in a {obs.room_type}. I can see {listed}."
    return f"I'm in a {obs.room_type}. I can see nothing notable."


def _tokens(text: str) -> set[str]:
    return set(_TOKEN_RE.findall(text.lower()))


def lexical_localize(question: str, graph: EnvironmentGraph) -> list[NodeId]:
    """Rank nodes by token overlap between the question and each node's
    annotation (room type + objects + caption); ties by node id."""
    q = _tokens(question)
    scored = []
    for node in graph.node_ids:
        ann = graph.annotation(node)
        room = graph.rooms.get(ann.room_id)
        vocab = _tokens(" ".join([
            room.room_type if room else "",
            " ".join(ann.objects),
            ann.caption or "",
        ]))
        scored.append((-len(q & vocab), node))
    scored.sort()
    return [node for _, node in scored]


def template_answer(
    graph: EnvironmentGraph, estimated: NodeId, goal: GoalRegion
) -> str:
    """Verbalize the shortest path from the estimate as room transitions."""
    if estimated in goal.node_ids:
        return "You are already in the goal room."
    path = graph.shortest_path_to_region(estimated, goal)
    rooms: list[str] = []
    for node in path:
        room = graph.room_of(node).room_type
        if not rooms or rooms[-1] != room:
            rooms.append(room)
    if len(rooms) < 2:
        return "Stay where you are, that is the goal room."
    hops = [
        f"go from the {rooms[i]} to the {rooms[i + 1]}" for i in range(len(rooms) - 1)
    ]
    return ", then ".join(hops) + ", and that is the goal room."


class GuidePolicy(Protocol):
    def localize(
        self, graph: EnvironmentGraph, goal: GoalRegion, instruction: str,
        dialog: Sequence, question: str,
    ) -> NodeId: ...

    def answer(
        self, graph: EnvironmentGraph, goal: GoalRegion, instruction: str,
        dialog: Sequence, question: str, estimate: NodeId,
    ) -> str: ...


class TemplateGuide:
    """Lexical localization plus templated path answers."""

    def localize(self, graph, goal, instruction, dialog, question) -> NodeId:
        return lexical_localize(question, graph)[0]

    def answer(self, graph, goal, instruction, dialog, question, estimate) -> str:
        return template_answer(graph, estimate, goal)


class RandomGuide:
    """Uniform-random localization; templated answers from that estimate."""

    def __init__(self, rng: random.Random):
        self.rng = rng

    def localize(self, graph, goal, instruction, dialog, question) -> NodeId:
        return self.rng.choice(graph.node_ids)

    def answer(self, graph, goal, instruction, dialog, question, estimate) -> str:
        return template_answer(graph, estimate, goal)


# ----------------------------------------------------------------- runner


def run_episode(
    task: EpisodeTask,
    navigator: NavigatorPolicy,
    guide: GuidePolicy,
    wta: WtaConfig,
    config: Optional[EngineConfig] = None,
    rng: Optional[random.Random] = None,
    sample: bool = False,
) -> EpisodeState:
    """Drive one full episode through the engine with built-in policies.

    With sample=False the navigator takes the argmax action; with
    sample=True it draws from the distribution using rng.
    """
    config = config or EngineConfig()
    rng = rng or random.Random(config.seed)
    state = engine.start_episode(task, config)
    graph = task.graph
    while state.phase is not Phase.TERMINAL:
        obs = observe(graph, state)
        dist = navigator.act(graph, obs)
        ask_now = (
            wta_decide(wta, dist)
            and state.dialog_turns_used < config.max_dialog_turns
        )
        if ask_now:
            question = template_question(obs)
            state = engine.navigator_step(state, Ask(question))
            estimate = guide.localize(
                graph, task.goal, task.instruction, state.dialog, question
            )
            state = engine.guide_localize(state, estimate)
            text = guide.answer(
                graph, task.goal, task.instruction, state.dialog, question, estimate
            )
            state = engine.guide_answer(state, text)
            wta.note_answer()
            continue
        action = dist.sample(rng) if sample else dist.argmax()
        state = engine.navigator_step(state, action)
        if isinstance(action, Move):
            wta.note_move()
    return state


# ----------------------------------------------------------------- replay


class ReplayNavigator:
    """Scripted policy that re-emits a recorded episode's moves and asks."""

    def __init__(self, episode: Episode):
        self.episode = episode
        positions = dialog_node_positions(episode.trajectory, episode.dialog)
        if any(p is None for p in positions):
            raise ValueError(
                f"episode {episode.episode_id!r} dialog is inconsistent with its "
                f"trajectory; cannot replay"
            )
        self._actions: list[Action] = []
        turn = 0
        for i, node in enumerate(episode.trajectory):
            if i > 0:
                self._actions.append(Move(node))
            while turn < len(positions) and positions[turn] == i:
                self._actions.append(Ask(episode.dialog[turn].question))
                turn += 1
        self._actions.append(Stop())

    @property
    def actions(self) -> list[Action]:
        return list(self._actions)


class ReplayGuide:
    """Replays the recorded estimates and answers turn by turn."""

    def __init__(self, episode: Episode):
        self.episode = episode
        self._turn = 0

    def localize(self, graph, goal, instruction, dialog, question) -> NodeId:
        t = self.episode.dialog[self._turn]
        return t.estimated_node if t.estimated_node is not None else t.node

    def answer(self, graph, goal, instruction, dialog, question, estimate) -> str:
        t = self.episode.dialog[self._turn]
        self._turn += 1
        return t.answer or "(no answer recorded)"


def run_replay(
    episode: Episode,
    graph: EnvironmentGraph,
    config: Optional[EngineConfig] = None,
) -> EpisodeState:
    """Re-drive a recorded episode through the engine; the outcome trajectory
    and dialog nodes match the recording exactly."""
    config = config or EngineConfig(
        max_nav_steps=max(80, len(episode.trajectory) + 1),
        max_dialog_turns=max(20, len(episode.dialog) + 1),
    )
    task = EpisodeTask(
        episode_id=episode.episode_id,
        graph=graph,
        start=episode.start,
        goal=episode.goal,
        instruction=episode.instruction,
    )
    nav = ReplayNavigator(episode)
    gui = ReplayGuide(episode)
    state = engine.start_episode(task, config)
    for action in nav.actions:
        if state.phase is Phase.TERMINAL:
            break
        state = engine.navigator_step(state, action)
        if isinstance(action, Ask):
            question = action.text
            estimate = gui.localize(
                graph, task.goal, task.instruction, state.dialog, question
            )
            state = engine.guide_localize(state, estimate)
            state = engine.guide_answer(
                state,
                gui.answer(graph, task.goal, task.instruction, state.dialog,
                           question, estimate),
            )
    if state.phase is not Phase.TERMINAL:
        state = engine.navigator_step(state, Stop())
    return state
