"""Operator command line: run benchmarks, sweep whether-to-ask parameters,
compute dataset statistics, validate datasets, emit segment files, replay
event logs, and serve networked play.

Every failure path prints a machine-parseable JSON error record to stderr
and exits nonzero. Identical config + seeds produce byte-identical outputs.
"""

from __future__ import annotations

import asyncio
import dataclasses
import functools
import json
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import click

from . import agents, engine, metrics
from .dataset import (
    Episode,
    EpisodeValidationError,
    GraphStore,
    compute_statistics,
    load_episodes,
    load_manifest,
    serialize_segment,
    split_table,
    to_segments,
)
from .engine import EngineConfig, EpisodeTask
from .env_graph import GraphError, load_graph
from .protocol import ServeConfig, DialNavServer


def _fail(code: str, message: str, exit_code: int = 1):
    sys.stderr.write(json.dumps({"error": {"code": code, "message": message}}) + "\n")
    sys.exit(exit_code)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (GraphError, EpisodeValidationError) as exc:
            _fail("invalid_input", str(exc))
        except FileNotFoundError as exc:
            _fail("missing_file", str(exc))

    return wrapper


@click.group()
def main():
    """Dialog-navigation benchmark framework."""


# ----------------------------------------------------------------- policies


def _engine_config(doc: dict) -> EngineConfig:
    return EngineConfig(
        max_nav_steps=doc.get("max_nav_steps", 80),
        max_dialog_turns=doc.get("max_dialog_turns", 20),
        interactive_guess_mode=doc.get("interactive_guess_mode", False),
        seed=doc.get("seed", 0),
    )


def _wta_config(doc: dict) -> agents.WtaConfig:
    return agents.WtaConfig(
        strategy=doc.get("strategy", "never"),
        k=doc.get("k", 1),
        tau=doc.get("tau", 0.5),
        confidence_stat=doc.get("confidence_stat", "max_prob"),
    )


def _episode_task(e: Episode, graph) -> EpisodeTask:
    return EpisodeTask(
        episode_id=e.episode_id,
        graph=graph,
        start=e.start,
        goal=e.goal,
        instruction=e.instruction,
    )


def _run_one(e: Episode, store: GraphStore, cfg: dict, seed: int) -> metrics.MetricReport:
    """One (episode, seed) rollout with the configured policies."""
    graph = store(e.scan_id)
    nav_spec = cfg.get("navigator", {"policy": "oracle"})
    guide_spec = cfg.get("guide", {"policy": "template"})
    econf = dataclasses.replace(_engine_config(cfg.get("engine", {})), seed=seed)

    if nav_spec.get("policy") == "replay":
        state = agents.run_replay(e, graph, econf)
        return metrics.score_episode(engine.finalize(state), graph)

    rng = random.Random((seed, e.episode_id).__repr__())
    task = _episode_task(e, graph)
    if nav_spec.get("policy") == "random":
        navigator = agents.RandomNavigator(rng)
        sample = True
    elif nav_spec.get("policy") == "oracle":
        navigator = agents.OracleNavigator(e.goal)
        sample = False
    else:
        raise EpisodeValidationError(
            f"unknown navigator policy {nav_spec.get('policy')!r}"
        )
    if guide_spec.get("policy") == "random":
        guide = agents.RandomGuide(rng)
    elif guide_spec.get("policy") == "template":
        guide = agents.TemplateGuide()
    else:
        raise EpisodeValidationError(f"unknown guide policy {guide_spec.get('policy')!r}")
    wta = _wta_config(cfg.get("wta", {}))
    state = agents.run_episode(task, navigator, guide, wta, econf, rng, sample=sample)
    return metrics.score_episode(engine.finalize(state), graph)


def _benchmark(cfg: dict, config_dir: Path, jobs: int = 1):
    manifest = load_manifest(Path(config_dir) / cfg["manifest"])
    split = cfg.get("split")
    episodes = load_episodes(manifest, strict=cfg.get("strict", False),
                             split_filter=split)
    if not episodes:
        raise EpisodeValidationError("no episodes selected")
    store = GraphStore(manifest.graph_dir)
    seeds = cfg.get("seeds", [0, 1, 2, 3, 4])
    if not seeds:
        raise EpisodeValidationError("at least one seed is required")

    per_seed: dict[int, list[metrics.MetricReport]] = {}
    for seed in seeds:
        work = [(e, seed) for e in episodes]
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                reports = list(pool.map(lambda w: _run_one(w[0], store, cfg, w[1]), work))
        else:
            reports = [_run_one(e, store, cfg, seed) for e, seed in work]
        per_seed[seed] = sorted(reports, key=lambda r: r.episode_id)
    return episodes, seeds, per_seed


def _mean_summaries(summaries: list[metrics.MetricSummary]) -> dict:
    def mean(vals):
        vals = [v for v in vals if v is not None]
        return sum(vals) / len(vals) if vals else None

    return {
        "episodes": summaries[0].episodes,
        "seeds": len(summaries),
        "SR": mean([s.sr for s in summaries]),
        "OSR": mean([s.osr for s in summaries]),
        "SPL": mean([s.spl for s in summaries]),
        "NE": mean([s.ne for s in summaries]),
        "NSC": mean([s.nsc for s in summaries]),
        "DTC": mean([s.dtc for s in summaries]),
        "LE": mean([s.le for s in summaries]),
        "A@3": mean([s.le_accuracy_at_3m for s in summaries]),
        "GP": mean([s.gp for s in summaries]),
    }


@main.command()
@click.argument("config_path", type=click.Path(exists=True, path_type=Path))
@click.option("--output", "-o", type=click.Path(path_type=Path), default=Path("out"))
@click.option("--jobs", type=int, default=1, help="episode-level worker cap")
@_guarded
def run(config_path: Path, output: Path, jobs: int):
    """Run a benchmark from a declarative run-config file."""
    cfg = json.loads(config_path.read_text())
    episodes, seeds, per_seed = _benchmark(cfg, config_path.parent, jobs)
    output.mkdir(parents=True, exist_ok=True)
    summaries = []
    for seed in seeds:
        reports = per_seed[seed]
        (output / f"per_episode_seed{seed}.csv").write_text(
            metrics.reports_to_csv(reports)
        )
        summary = metrics.aggregate(reports)
        summaries.append(summary)
        (output / f"summary_seed{seed}.json").write_text(
            json.dumps(metrics.summary_to_record(summary), sort_keys=True, indent=2)
            + "\n"
        )
    (output / "summary.json").write_text(
        json.dumps(_mean_summaries(summaries), sort_keys=True, indent=2) + "\n"
    )
    click.echo(f"wrote {len(seeds)} seed runs over {len(episodes)} episodes to {output}")


@main.command()
@click.argument("config_path", type=click.Path(exists=True, path_type=Path))
@click.option("--strategy", required=True,
              type=click.Choice(["fixed_interval", "confidence_threshold", "always", "never"]))
@click.option("--grid", required=True, help="comma-separated k or tau values")
@click.option("--output", "-o", type=click.Path(path_type=Path), default=Path("sweep.csv"))
@_guarded
def sweep(config_path: Path, strategy: str, grid: str, output: Path):
    """Sweep a whether-to-ask parameter grid; rows of (parameter, SR, DTC)."""
    cfg = json.loads(config_path.read_text())
    values = [v for v in grid.split(",") if v]
    if not values:
        _fail("empty_grid", "the parameter grid is empty")
    rows = []
    for raw in sorted(values, key=float):
        param = float(raw)
        wta = {"strategy": strategy}
        if strategy == "fixed_interval":
            wta["k"] = int(param)
        elif strategy == "confidence_threshold":
            wta["tau"] = param
        point_cfg = {**cfg, "wta": {**cfg.get("wta", {}), **wta}}
        _, seeds, per_seed = _benchmark(point_cfg, config_path.parent)
        summaries = [metrics.aggregate(per_seed[s]) for s in seeds]
        rows.append((param,
                     sum(s.sr for s in summaries) / len(summaries),
                     sum(s.dtc for s in summaries) / len(summaries)))
    lines = ["parameter,SR,DTC"]
    lines += [f"{p:g},{sr:.6f},{dtc:.6f}" for p, sr, dtc in rows]
    output.write_text("\n".join(lines) + "\n")
    click.echo("\n".join(lines))


@main.command()
@click.argument("manifest_path", type=click.Path(exists=True, path_type=Path))
@click.option("--split", default=None)
@_guarded
def stats(manifest_path: Path, split: Optional[str]):
    """Dataset statistics (trajectory lengths, QA counts, word counts)."""
    manifest = load_manifest(manifest_path)
    episodes = load_episodes(manifest, strict=False, split_filter=split)
    store = GraphStore(manifest.graph_dir)
    report = compute_statistics(episodes, store)
    doc = dataclasses.asdict(report)
    doc["qa_histogram"] = {str(k): v for k, v in report.qa_histogram.items()}
    doc["split_table"] = {
        k: dataclasses.asdict(v) for k, v in split_table(manifest).items()
    }
    click.echo(json.dumps(doc, sort_keys=True, indent=2))


@main.command()
@click.argument("manifest_path", type=click.Path(exists=True, path_type=Path))
@click.option("--mode", type=click.Choice(["strict", "lenient"]), default="strict")
@_guarded
def validate(manifest_path: Path, mode: str):
    """Validate every graph and episode; exit nonzero on strict errors."""
    manifest = load_manifest(manifest_path)
    store = GraphStore(manifest.graph_dir)
    errors = []
    warnings = []
    from .dataset import _read_document, parse_episode  # single validation path

    for entry in manifest.entries:
        try:
            doc = _read_document(entry.path.read_text())
            doc["split"] = entry.split
            e = parse_episode(doc, store(str(doc.get("scan"))), strict=(mode == "strict"))
            warnings.extend(f"{entry.path.name}: {w}" for w in e.warnings)
        except (EpisodeValidationError, GraphError, KeyError) as exc:
            errors.append(f"{entry.path.name}: {exc}")
    click.echo(json.dumps(
        {"episodes": len(manifest.entries), "errors": errors, "warnings": warnings},
        sort_keys=True, indent=2,
    ))
    if errors:
        sys.exit(1)


@main.command()
@click.argument("manifest_path", type=click.Path(exists=True, path_type=Path))
@click.option("--output", "-o", type=click.Path(path_type=Path), default=Path("segments"))
@_guarded
def segments(manifest_path: Path, output: Path):
    """Write one JSON file per segment instance."""
    manifest = load_manifest(manifest_path)
    episodes = load_episodes(manifest, strict=False)
    output.mkdir(parents=True, exist_ok=True)
    count = 0
    for e in episodes:
        for s in to_segments(e):
            path = output / f"{e.episode_id}_seg{s.segment_index}.json"
            path.write_text(json.dumps(serialize_segment(s), sort_keys=True, indent=2) + "\n")
            count += 1
    click.echo(f"wrote {count} segment files to {output}")


@main.command()
@click.argument("log_path", type=click.Path(exists=True, path_type=Path))
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@_guarded
def replay(log_path: Path, graph_path: Path):
    """Replay an event log against its graph and print the metric report."""
    g = load_graph(graph_path.read_text())
    events = engine.parse_event_log(log_path.read_text())
    try:
        state = engine.replay_events(events, g)
    except engine.EngineError as exc:
        _fail("replay_failed", str(exc))
    reproduced = engine.serialize_event_log(state.event_log)
    if reproduced != log_path.read_text():
        _fail("replay_diverged", "replayed event log differs from the input log")
    outcome = engine.finalize(state)
    report = metrics.score_episode(outcome, g)
    click.echo(json.dumps(metrics.report_to_record(report), sort_keys=True, indent=2))


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8750)
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--split", default=None)
@click.option("--engine-config", "engine_path", type=click.Path(exists=True, path_type=Path))
@click.option("--timeout", type=float, default=120.0, help="per-turn timeout seconds")
@click.option("--max-episodes", type=int, default=None)
@click.option("--ws-port", type=int, default=None, help="browser WebSocket port")
@click.option("--static-dir", type=click.Path(path_type=Path), default=None,
              help="web UI assets served next to the /session endpoint")
@click.option("--event-log-dir", type=click.Path(path_type=Path), default=None,
              help="write one .events file per finished episode")
@_guarded
def serve(host, port, manifest_path, split, engine_path, timeout, max_episodes,
          ws_port, static_dir, event_log_dir):
    """Serve networked play: pairs remote navigator/guide agents per episode."""
    manifest = load_manifest(manifest_path)
    episodes = load_episodes(manifest, strict=False, split_filter=split)
    if not episodes:
        _fail("no_tasks", "manifest has no episodes to serve")
    store = GraphStore(manifest.graph_dir)
    tasks = [_episode_task(e, store(e.scan_id)) for e in episodes]
    econf = _engine_config(json.loads(engine_path.read_text()) if engine_path else {})
    config = ServeConfig(host=host, port=port, engine=econf,
                         turn_timeout=timeout, max_episodes=max_episodes,
                         event_log_dir=str(event_log_dir) if event_log_dir else None)

    async def serve_forever():
        server = DialNavServer(config, tasks)
        await server.start()
        click.echo(f"listening on {host}:{server.port} ({len(tasks)} tasks)",
                   nl=True)
        sys.stdout.flush()  # port discovery for wrappers driving --port 0
        if ws_port is not None:
            await server.serve_websocket(ws_port, static_dir)
            click.echo(f"websocket /session on {host}:{ws_port}")
        if config.max_episodes is not None:
            await server.all_done.wait()
            await server.close()
        else:
            await asyncio.Event().wait()

    asyncio.run(serve_forever())


if __name__ == "__main__":
    main()
