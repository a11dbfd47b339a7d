#!/usr/bin/env python3
"""Goal-progress benchmark over segment instances: every episode with M
dialog turns contributes M+1 navigation tasks, each starting where the
corresponding trajectory prefix ends. Prints mean GP per (policy, split).

    python3 scripts/segment_benchmark.py out/toy/manifest.json
"""

import argparse
import random
from pathlib import Path

from dialnav import agents, engine, metrics
from dialnav.dataset import GraphStore, SPLITS, load_episodes, load_manifest, to_segments
from dialnav.engine import EngineConfig, EpisodeTask


def segment_tasks(manifest, store, split):
    tasks = []
    for e in load_episodes(manifest, strict=False, split_filter=split):
        g = store(e.scan_id)
        for s in to_segments(e):
            tasks.append(EpisodeTask(
                f"{e.episode_id}.{s.segment_index}", g,
                s.trajectory_prefix[-1], e.goal, e.instruction,
            ))
    return tasks


def mean_gp(tasks, policy, seed):
    gps = []
    for t in tasks:
        rng = random.Random((seed, t.episode_id).__repr__())
        if policy == "oracle":
            nav, sample = agents.OracleNavigator(t.goal), False
        else:
            nav, sample = agents.RandomNavigator(rng), True
        state = agents.run_episode(
            t, nav, agents.TemplateGuide(), agents.WtaConfig("never"),
            EngineConfig(max_nav_steps=80, seed=seed), rng, sample=sample,
        )
        gps.append(metrics.score_episode(engine.finalize(state), t.graph).goal_progress)
    return sum(gps) / len(gps)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("manifest", type=Path)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    manifest = load_manifest(args.manifest)
    store = GraphStore(manifest.graph_dir)
    print(f"{'policy':<8} {'split':<11} {'instances':>9} {'GP':>7}")
    for split in SPLITS:
        tasks = segment_tasks(manifest, store, split)
        if not tasks:
            continue
        print(f"{'oracle':<8} {split:<11} {len(tasks):>9} "
              f"{mean_gp(tasks, 'oracle', 0):>7.2f}")
        rand = sum(mean_gp(tasks, "random", s) for s in range(args.seeds)) / args.seeds
        print(f"{'random':<8} {split:<11} {len(tasks):>9} {rand:>7.2f}")


if __name__ == "__main__":
    main()
