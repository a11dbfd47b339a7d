#!/usr/bin/env python3
"""Run the oracle and random navigation baselines over a dataset manifest
and print one summary row per (policy, split), mirroring the benchmark
tables produced by `dialnav run`.

    python3 scripts/run_baselines.py out/toy/manifest.json --seeds 5
"""

import argparse
import random
from pathlib import Path

from dialnav import agents, engine, metrics
from dialnav.dataset import GraphStore, SPLITS, load_episodes, load_manifest
from dialnav.engine import EngineConfig, EpisodeTask


def run_policy(episodes, store, policy, seed):
    reports = []
    for e in episodes:
        graph = store(e.scan_id)
        task = EpisodeTask(e.episode_id, graph, e.start, e.goal, e.instruction)
        rng = random.Random((seed, e.episode_id).__repr__())
        if policy == "oracle":
            nav, sample = agents.OracleNavigator(e.goal), False
        else:
            nav, sample = agents.RandomNavigator(rng), True
        state = agents.run_episode(
            task, nav, agents.TemplateGuide(), agents.WtaConfig("never"),
            EngineConfig(max_nav_steps=80, seed=seed), rng, sample=sample,
        )
        reports.append(metrics.score_episode(engine.finalize(state), graph))
    return metrics.aggregate(reports)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("manifest", type=Path)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    manifest = load_manifest(args.manifest)
    store = GraphStore(manifest.graph_dir)

    header = f"{'policy':<8} {'split':<11} {'n':>4} {'SR':>6} {'SPL':>6} " \
             f"{'NE':>6} {'GP':>6} {'DTC':>5}"
    print(header)
    print("-" * len(header))
    for split in SPLITS:
        episodes = load_episodes(manifest, strict=False, split_filter=split)
        if not episodes:
            continue
        for policy in ("oracle", "random"):
            seeds = range(args.seeds) if policy == "random" else [0]
            rows = [run_policy(episodes, store, policy, s) for s in seeds]
            mean = lambda xs: sum(xs) / len(xs)
            print(f"{policy:<8} {split:<11} {rows[0].episodes:>4} "
                  f"{mean([r.sr for r in rows]):>6.2f} "
                  f"{mean([r.spl for r in rows]):>6.2f} "
                  f"{mean([r.ne for r in rows]):>6.2f} "
                  f"{mean([r.gp for r in rows]):>6.2f} "
                  f"{mean([r.dtc for r in rows]):>5.2f}")


if __name__ == "__main__":
    main()
