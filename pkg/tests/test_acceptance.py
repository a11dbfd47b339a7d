"""Acceptance gate: one test per release criterion, each printing a PASS,
FAIL, or SKIP line (run with -s to see them inline).

Criteria that need the full released dialog-navigation dataset are skipped
unless DIALNAV_DATASET_MANIFEST points at its manifest file.
"""

import asyncio
import functools
import json
import os
import random
import time

import pytest

from dialnav import agents, engine as eng, metrics
from dialnav.agents import (
    ActionDistribution,
    OracleNavigator,
    RandomNavigator,
    TemplateGuide,
    WtaConfig,
    run_episode,
    wta_decide,
)
from dialnav.dataset import (
    GraphStore,
    compute_statistics,
    load_episodes,
    load_manifest,
    split_table,
    to_segments,
)
from dialnav.engine import EngineConfig, EpisodeTask, Move, Ask, Stop
from dialnav.env_graph import EnvironmentGraph, GoalRegion, load_graph
from dialnav.metrics import EpisodeOutcome, LocalizationRecord, score_episode
from dialnav.protocol import ProtocolError, decode

from conftest import brute_force_geodesic, random_connected_graph_doc

DATASET_ENV = "DIALNAV_DATASET_MANIFEST"


def criterion(name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except pytest.skip.Exception:
                print(f"\n[criterion] {name}: SKIP")
                raise
            except BaseException:
                print(f"\n[criterion] {name}: FAIL")
                raise
            print(f"\n[criterion] {name}: PASS")

        return wrapper

    return deco


def released_dataset():
    path = os.environ.get(DATASET_ENV)
    if not path:
        pytest.skip(f"released dataset not supplied; set {DATASET_ENV}")
    manifest = load_manifest(path)
    return manifest, GraphStore(manifest.graph_dir)


def random_graph(rng, n=None) -> EnvironmentGraph:
    n = n or rng.randint(2, 12)
    return load_graph(json.dumps(random_connected_graph_doc(rng, n)))


def brute_force_region_path(g, source, goal):
    """All simple paths, min by (length, terminal id, node sequence)."""
    best = []

    def visit(node, total, path):
        if node in goal.node_ids:
            best.append((total, path[-1], path))
            return
        for v in g.neighbors(node):
            if v not in path:
                visit(v, total + g.edge_length(node, v), path + [v])

    visit(source, 0.0, [source])
    shortest = min(t for t, _, _ in best)
    ties = [(term, p) for t, term, p in best if t <= shortest + 1e-9]
    return shortest, min(ties)[1]


# ---------------------------------------------------------------- criteria


@criterion("geodesic oracle exact on 200 random graphs, < 5 s")
def test_geodesic_oracle():
    rng = random.Random(2026)
    t0 = time.monotonic()
    for _ in range(200):
        g = random_graph(rng)
        ids = g.node_ids
        a, b = rng.choice(ids), rng.choice(ids)
        assert g.geodesic_distance(a, b) == pytest.approx(
            brute_force_geodesic(g, a, b), abs=1e-9
        )
        goal = GoalRegion.of(*rng.sample(ids, rng.randint(1, min(3, len(ids)))))
        want_len, want_path = brute_force_region_path(g, a, goal)
        path = g.shortest_path_to_region(a, goal)
        assert path == want_path
        assert g.path_length(path) == pytest.approx(want_len, abs=1e-9)
        assert g.geodesic_to_region(a, goal) == pytest.approx(want_len, abs=1e-9)
    assert time.monotonic() - t0 < 5.0


def random_outcome(rng, g, episode_id="x"):
    ids = g.node_ids
    start = rng.choice(ids)
    visited = [start]
    for _ in range(rng.randrange(0, 15)):
        visited.append(rng.choice(g.neighbors(visited[-1])))
    goal = GoalRegion.of(*rng.sample(ids, rng.randint(1, min(3, len(ids)))))
    records = tuple(
        LocalizationRecord(i + 1, rng.choice(visited), rng.choice(ids))
        for i in range(rng.randrange(0, 4))
    )
    return EpisodeOutcome(
        episode_id=episode_id,
        scan_id=g.scan_id,
        start=start,
        goal=goal,
        visited=tuple(visited),
        stopped=rng.random() < 0.7,
        dialog_turns=len(records),
        localization_records=records,
    )


@criterion("metric laws hold over 1,000 randomized outcomes")
def test_metric_laws():
    rng = random.Random(99)
    scale = 2.5
    for i in range(1000):
        doc = random_connected_graph_doc(rng, rng.randint(2, 10))
        g = load_graph(json.dumps(doc))
        outcome = random_outcome(rng, g, f"o{i}")
        r = score_episode(outcome, g)

        assert r.spl <= r.success <= r.oracle_success
        assert (r.nav_error == 0.0) == (outcome.visited[-1] in outcome.goal.node_ids)
        assert r.goal_progress <= g.geodesic_to_region(outcome.start, outcome.goal) + 1e-9

        # Position-scaling covariance: distances scale, counts/booleans don't.
        for node in doc["nodes"]:
            node["x"] *= scale
            node["y"] *= scale
            node["z"] *= scale
        rs = score_episode(outcome, load_graph(json.dumps(doc)))
        assert (rs.success, rs.oracle_success, rs.nsc, rs.dtc) == (
            r.success, r.oracle_success, r.nsc, r.dtc
        )
        assert rs.spl == pytest.approx(r.spl, abs=1e-9)
        assert rs.nav_error == pytest.approx(r.nav_error * scale, rel=1e-9, abs=1e-9)
        assert rs.goal_progress == pytest.approx(
            r.goal_progress * scale, rel=1e-9, abs=1e-9
        )
        if r.le_mean is not None:
            assert rs.le_mean == pytest.approx(r.le_mean * scale, rel=1e-9, abs=1e-9)


@criterion("oracle navigator end-to-end: SR 100%, SPL 1, GP exact on 100 tasks")
def test_oracle_end_to_end():
    rng = random.Random(4)
    for i in range(100):
        g = random_graph(rng)
        ids = g.node_ids
        start = rng.choice(ids)
        goal = GoalRegion.of(*rng.sample(ids, rng.randint(1, min(3, len(ids)))))
        task = EpisodeTask(f"t{i}", g, start, goal, "go")
        state = run_episode(task, OracleNavigator(goal), TemplateGuide(),
                            WtaConfig("never"),
                            EngineConfig(max_nav_steps=len(ids) * 2))
        r = score_episode(eng.finalize(state), g)
        assert r.success == 1
        assert abs(r.spl - 1.0) <= 1e-9
        assert r.goal_progress == g.geodesic_to_region(start, goal)


@criterion("segment law: instances = dialog turns + 1 on every episode")
def test_segment_law(dataset_dir):
    manifest = load_manifest(dataset_dir / "manifest.json")
    for e in load_episodes(manifest):
        assert len(to_segments(e)) == len(e.dialog) + 1
    path = os.environ.get(DATASET_ENV)
    if path:
        manifest = load_manifest(path)
        table = split_table(manifest)
        assert table["total"].segments == 6403
        assert table["total"].segments_with_dialog == 4172
        want = {"train": (4493, 2934), "val_seen": (337, 226),
                "val_unseen": (805, 529), "test": (768, 483)}
        for split, (segs, with_dialog) in want.items():
            assert table[split].segments == segs
            assert table[split].segments_with_dialog == with_dialog


@criterion("released-dataset statistics match the published corpus")
def test_released_dataset_statistics():
    manifest, store = released_dataset()
    episodes = load_episodes(manifest, strict=False)
    report = compute_statistics(episodes, store)
    assert report.episode_count == 2231
    assert report.per_split_counts == {
        "train": 1559, "val_seen": 111, "val_unseen": 276, "test": 285,
    }
    assert report.shortest_path.mean_meters == pytest.approx(30.68, abs=0.2)
    assert report.human_trajectory.mean_meters == pytest.approx(46.73, abs=0.2)
    assert report.mean_qa_per_episode == pytest.approx(1.87, abs=0.02)
    assert report.max_qa == 8
    assert report.zero_dialog_count == 10
    assert report.mean_question_words == pytest.approx(27.63, abs=0.5)
    assert report.mean_answer_words == pytest.approx(42.24, abs=0.5)


def _segment_tasks(manifest, store, split):
    """One navigation task per segment instance: start at the prefix end."""
    tasks = []
    for e in load_episodes(manifest, strict=False, split_filter=split):
        g = store(e.scan_id)
        for s in to_segments(e):
            tasks.append(EpisodeTask(
                f"{e.episode_id}.{s.segment_index}", g,
                s.trajectory_prefix[-1], e.goal, e.instruction,
            ))
    return tasks


@criterion("baseline goal-progress rows match the published numbers")
def test_released_baseline_gp_rows():
    manifest, store = released_dataset()
    expected_oracle = {"val_seen": 22.51, "val_unseen": 23.06, "test": 25.23}
    expected_random = {"val_seen": 1.91, "val_unseen": 1.94, "test": 0.25}
    for split in expected_oracle:
        tasks = _segment_tasks(manifest, store, split)
        gps = []
        for t in tasks:
            state = run_episode(t, OracleNavigator(t.goal), TemplateGuide(),
                                WtaConfig("never"), EngineConfig(max_nav_steps=500))
            gps.append(score_episode(eng.finalize(state), t.graph).goal_progress)
        assert sum(gps) / len(gps) == pytest.approx(expected_oracle[split], abs=0.3)

        seed_means = []
        for seed in range(5):
            gps = []
            for t in tasks:
                rng = random.Random((seed, t.episode_id).__repr__())
                state = run_episode(t, RandomNavigator(rng), TemplateGuide(),
                                    WtaConfig("never"),
                                    EngineConfig(max_nav_steps=80), rng, sample=True)
                gps.append(score_episode(eng.finalize(state), t.graph).goal_progress)
            seed_means.append(sum(gps) / len(gps))
        mean = sum(seed_means) / len(seed_means)
        assert mean == pytest.approx(expected_random[split], abs=1.5)


@criterion("uniform-random localizer matches the published error row")
def test_released_random_localizer_row():
    manifest, store = released_dataset()
    expected_le = {"val_seen": 19.76, "val_unseen": 18.77, "test": 21.54}
    expected_a3 = {"val_seen": 7.96, "val_unseen": 4.34, "test": 3.46}
    for split in expected_le:
        episodes = [e for e in load_episodes(manifest, strict=False,
                                             split_filter=split) if e.dialog]
        le_means, a3s = [], []
        for seed in range(5):
            rng = random.Random(seed)
            reports = []
            for e in episodes:
                g = store(e.scan_id)
                records = tuple(
                    LocalizationRecord(t.turn_index, t.node, rng.choice(g.node_ids))
                    for t in e.dialog
                )
                outcome = EpisodeOutcome(
                    e.episode_id, e.scan_id, e.start, e.goal, e.trajectory,
                    True, len(e.dialog), records,
                )
                reports.append(score_episode(outcome, g))
            summary = metrics.aggregate(reports)
            le_means.append(summary.le)
            a3s.append(summary.le_accuracy_at_3m)
        assert sum(le_means) / 5 == pytest.approx(expected_le[split], abs=1.0)
        assert sum(a3s) / 5 == pytest.approx(expected_a3[split], abs=2.0)


@criterion("engine fuzz: 1,000 sequences, protocol fuzz: 10,000 frames")
def test_engine_and_protocol_fuzz(house):
    rng = random.Random(31)
    goal = GoalRegion.of("G")
    for i in range(1000):
        task = EpisodeTask(f"f{i}", house, rng.choice(house.node_ids), goal, "go")
        cfg = EngineConfig(max_nav_steps=rng.randint(1, 12),
                           max_dialog_turns=rng.randint(1, 3),
                           interactive_guess_mode=rng.random() < 0.3)
        state = eng.start_episode(task, cfg)
        for _ in range(rng.randrange(0, 30)):
            if state.phase is eng.Phase.TERMINAL:
                break
            roll = rng.random()
            before = state
            try:
                if state.phase is eng.Phase.NAVIGATOR_TURN:
                    if roll < 0.55:
                        state = eng.navigator_step(
                            state, Move(rng.choice(house.node_ids))
                        )
                    elif roll < 0.75:
                        state = eng.navigator_step(state, Ask("where am i"))
                    elif roll < 0.85:
                        state = eng.navigator_step(state, eng.Guess())
                    elif roll < 0.9:
                        state = eng.navigator_step(state, Stop())
                    else:  # actions invalid in this phase must be rejected
                        state = eng.guide_localize(state, "A")
                elif state.phase is eng.Phase.AWAIT_LOCALIZATION:
                    if roll < 0.8:
                        state = eng.guide_localize(
                            state, rng.choice(house.node_ids)
                        )
                    else:
                        state = eng.navigator_step(state, Stop())
                elif state.phase is eng.Phase.AWAIT_ANSWER:
                    if roll < 0.8:
                        state = eng.guide_answer(state, "go that way")
                    else:
                        state = eng.guide_localize(state, "A")
            except eng.EngineError:
                assert state is before  # rejected actions never mutate state
        log = eng.serialize_event_log(state.event_log)
        replayed = eng.replay_events(eng.parse_event_log(log), house)
        assert eng.serialize_event_log(replayed.event_log) == log

    # Protocol fuzz: malformed frames raise ProtocolError, nothing else.
    for i in range(10000):
        n = rng.randrange(0, 120)
        if rng.random() < 0.5:
            blob = bytes(rng.randrange(256) for _ in range(n))
        else:  # JSON-shaped garbage exercises the schema checks
            blob = json.dumps({
                "seq": rng.choice([0, "x", None, 2.5]),
                "kind": rng.choice(["hello", "nope", 7, None]),
                "payload": rng.choice([{}, [], "s", 0]),
            }).encode()
        try:
            decode(blob)
        except ProtocolError:
            pass

    # Session survival under malformed frames is covered end-to-end in
    # test_protocol (error reply, session continues).


@criterion("whether-to-ask: fixed-interval exactness and threshold monotonicity")
def test_wta_determinism():
    onehot = ActionDistribution(((Stop(), 1.0),))
    for k in range(1, 21):
        for steps in range(1, 21):
            cfg = WtaConfig("fixed_interval", k=k)
            asks = 0
            for _ in range(steps):
                cfg.note_move()
                if wta_decide(cfg, onehot):
                    asks += 1
                    cfg.note_answer()
            assert asks == steps // k

    # Fixed rollout: one shared sequence of action distributions; DTC must
    # be non-increasing as tau decreases toward 0.
    rng = random.Random(5)
    rollout = []
    for _ in range(200):
        n = rng.randint(1, 6)
        weights = [rng.random() + 1e-6 for _ in range(n)]
        total = sum(weights)
        rollout.append(ActionDistribution(tuple(
            (Move(f"n{i}"), w / total) for i, w in enumerate(weights)
        )))
    taus = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    dtcs = []
    for tau in taus:
        cfg = WtaConfig("confidence_threshold", tau=tau)
        dtcs.append(sum(1 for d in rollout if wta_decide(cfg, d)))
    assert dtcs == sorted(dtcs)


@criterion("guide transcript is independent of the navigator trajectory")
def test_information_hiding(house):
    import test_protocol as tp

    def transcript(script):
        async def scenario():
            server = await tp.start_server(
                [tp.house_task(house)], max_episodes=1
            )
            nav = await tp.Client.connect(server.port, "navigator")
            gui = await tp.Client.connect(server.port, "guide")
            await asyncio.gather(
                tp.drive_navigator(nav, script),
                tp.drive_guide(gui, estimates=["E"]),
            )
            await server.close()
            return [{"kind": f.kind, "payload": f.payload} for f in gui.inbound[1:]]

        return asyncio.run(asyncio.wait_for(scenario(), 30))

    direct = tp.NAV_SCRIPT
    detour = [
        {"type": "move", "node": "B"},
        {"type": "ask", "text": "I'm in a hallway. I can see nothing notable."},
        {"type": "move", "node": "C"},
        {"type": "move", "node": "B"},
        {"type": "move", "node": "F"},
        {"type": "move", "node": "G"},
        {"type": "stop"},
    ]
    a, b = transcript(direct), transcript(detour)
    assert a == b
    blob = json.dumps(a)
    for forbidden in ("current", "trajectory", "visited", "nav_steps_used"):
        assert f'"{forbidden}"' not in blob
