"""Command-line interface.

Subcommands cover the whole pipeline: ingest/validate a corpus, analyze
queries, retrieve provisions, roll out a policy over benchmark items,
score trajectories, run the offline benchmark end to end, compute
group-relative advantages, and serve the retrieval API over HTTP.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .agent import BenchmarkItem, load_items, read_trajectories, write_trajectories
from .analyzer import AnalysisError, analyze_query
from .config import (
    MODE_FIXTURE,
    MODE_LIVE,
    ConfigError,
    RunConfig,
    load_run_config,
)
from .corpus import CorpusError, ingest_corpus, load_index, save_index, validate_corpus
from .grpo import RolloutGroup, group_report
from .retrieval import RetrievalEngine
from .rollout import (
    RecitePolicy,
    RemotePolicy,
    RolloutError,
    ScriptFilePolicy,
    run_items,
)
from .scoring import ScoringError, evaluate_run
from .tools import (
    FixturePageSource,
    FixtureSearchClient,
    LivePageSource,
    LiveSearchClient,
    ToolRegistry,
    VerbatimReader,
)


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _load_index(config: RunConfig):
    if config.index_dir:
        return load_index(config.index_dir)
    if config.corpus:
        return ingest_corpus(config.corpus)
    raise ConfigError("either --corpus or --index is required")


def _engine(config: RunConfig) -> RetrievalEngine:
    return RetrievalEngine(index=_load_index(config), config=config.retrieval)


def _registry(config: RunConfig, engine: RetrievalEngine) -> ToolRegistry:
    if config.tool_mode == MODE_LIVE:
        config.require_live_key()
        return ToolRegistry(
            search_client=LiveSearchClient(endpoint=config.search_endpoint or ""),
            page_source=LivePageSource(),
            reader=VerbatimReader(),
            engine=engine,
        )
    if not config.search_fixture or not config.pages_fixture:
        raise ConfigError(
            "fixture tool mode requires --search-fixture and --pages-fixture"
        )
    return ToolRegistry(
        search_client=FixtureSearchClient.from_file(config.search_fixture),
        page_source=FixturePageSource.from_file(config.pages_fixture),
        reader=VerbatimReader(),
        engine=engine,
    )


def _policy_factory(spec: str):
    if spec == "recite":
        return lambda item: RecitePolicy(item)
    if spec.startswith("script:"):
        scripts = ScriptFilePolicy.from_file(spec.split(":", 1)[1])
        return scripts.for_item
    if spec.startswith("remote:"):
        endpoint = spec.split(":", 1)[1]
        return lambda item: RemotePolicy(endpoint)
    raise ConfigError(f"unknown policy {spec!r}; use recite, script:FILE, or remote:URL")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    for key in (
        "corpus",
        "index_dir",
        "tool_mode",
        "search_fixture",
        "pages_fixture",
        "search_endpoint",
        "workers",
        "top_k",
    ):
        if hasattr(args, key) and getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "no_temporal_filter", False):
        overrides["temporal_filtering"] = False
    return load_run_config(args.config, overrides)


def _print_json(payload: object) -> None:
    print(json.dumps(payload, ensure_ascii=False, indent=2))


# --- subcommand handlers ------------------------------------------------------

def _cmd_ingest(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    if not config.corpus:
        raise ConfigError("--corpus is required")
    index = ingest_corpus(config.corpus)
    save_index(index, args.out)
    report = validate_corpus(index)
    print(f"ingested {len(index)} provisions into {args.out}")
    if not report.ok:
        print(
            f"warning: {len(report.overlaps)} window overlap(s),"
            f" {len(report.gaps)} coverage gap(s); run 'temporalex validate'",
            file=sys.stderr,
        )
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    index = _load_index(config)
    report = validate_corpus(index)
    if args.json:
        _print_json(report.to_dict())
    else:
        print(f"provisions: {len(index)}")
        for overlap in report.overlaps:
            until = overlap.end.isoformat() if overlap.end else "open"
            print(
                f"overlap: {overlap.statute_id} {overlap.article_label}"
                f" versions {overlap.version_a}/{overlap.version_b}"
                f" from {overlap.start.isoformat()} to {until}"
            )
        for gap in report.gaps:
            print(
                f"gap: {gap.statute_id} {gap.article_label}"
                f" covered until {gap.covered_until.isoformat()},"
                f" resumes {gap.resumes_at.isoformat()}"
                f" ({gap.version_before} -> {gap.version_after})"
            )
        print("corpus ok" if report.ok else "corpus has diagnostics")
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    analysis = analyze_query(args.query)
    _print_json(analysis.to_dict())
    return 0


def _cmd_retrieve(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    engine = _engine(config)
    time_hint = None
    if args.date:
        time_hint = [(args.date, args.date)]
    elif args.date_from or args.date_to:
        if not (args.date_from and args.date_to):
            raise ConfigError("--from and --to must be given together")
        time_hint = [(args.date_from, args.date_to)]
    hits = engine.retrieve(args.query, time_hint=time_hint)
    if args.json:
        _print_json({"hits": [hit.to_dict() for hit in hits]})
        return 0
    if not hits:
        print("no provisions found")
        return 0
    for rank, hit in enumerate(hits, start=1):
        window = hit.window
        until = window.t_to.isoformat() if window.t_to else "present"
        ranks = ", ".join(
            f"{channel}={rank_}" for channel, rank_ in hit.channel_ranks.items() if rank_
        )
        print(
            f"{rank}. {hit.provision_id} score={hit.rrf_score:.6f}"
            f" valid={window.t_from.isoformat()}..{until} [{ranks}]"
        )
        print(f"   {hit.text}")
    return 0


def _rollout_common(args: argparse.Namespace) -> tuple[RunConfig, list[BenchmarkItem], list]:
    config = _config_from_args(args)
    items = load_items(args.items)
    engine = _engine(config)
    registry = _registry(config, engine)
    factory = _policy_factory(args.policy)
    trajectories = run_items(
        items, factory, registry, limits=config.limits, workers=config.workers
    )
    return config, items, trajectories


def _cmd_rollout(args: argparse.Namespace) -> int:
    _, _, trajectories = _rollout_common(args)
    write_trajectories(trajectories, args.out)
    answered = sum(1 for t in trajectories if t.steps and t.steps[-1].action.kind == "answer")
    print(f"wrote {len(trajectories)} trajectories to {args.out} ({answered} answered)")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    items = load_items(args.items)
    trajectories = read_trajectories(args.trajectories)
    report = evaluate_run(trajectories, items)
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
    if args.json:
        _print_json(report.to_dict())
    else:
        print(report.format_table())
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    _, items, trajectories = _rollout_common(args)
    report = evaluate_run(trajectories, items)
    rewards = {entry.item_id: entry.reward for entry in report.items}
    for trajectory in trajectories:
        trajectory.terminal_reward = rewards.get(trajectory.item_id)
    if args.out_trajectories:
        write_trajectories(trajectories, args.out_trajectories)
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
    if args.json:
        _print_json(report.to_dict())
    else:
        print(report.format_table())
    return 0


def _cmd_advantages(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    group = RolloutGroup.from_file(args.group)
    _print_json(group_report(group, config.shaping))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    config = _config_from_args(args)
    app = create_app(_engine(config))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="temporalex",
        description="Temporally-versioned statute retrieval and rollout toolkit",
    )
    parser.add_argument("--config", help="path to a key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_corpus_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--corpus", help="line-delimited provision records")
        p.add_argument("--index", dest="index_dir", help="persisted index directory")

    p = sub.add_parser("ingest", help="build and persist a corpus index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="index directory to write")
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("validate", help="report window overlaps and coverage gaps")
    add_corpus_args(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("analyze", help="run query analysis")
    p.add_argument("--query", required=True)
    p.set_defaults(handler=_cmd_analyze)

    p = sub.add_parser("retrieve", help="retrieve provisions for a query")
    add_corpus_args(p)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, dest="top_k", help="number of hits")
    p.add_argument("--date", help="point-in-time hint, YYYY-MM-DD")
    p.add_argument("--from", dest="date_from", help="hint interval start")
    p.add_argument("--to", dest="date_to", help="hint interval end")
    p.add_argument("--no-temporal-filter", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_retrieve)

    def add_rollout_args(p: argparse.ArgumentParser) -> None:
        add_corpus_args(p)
        p.add_argument("--items", required=True, help="benchmark items, one JSON per line")
        p.add_argument("--mode", dest="tool_mode", choices=[MODE_FIXTURE, MODE_LIVE])
        p.add_argument("--policy", default="recite", help="recite | script:FILE | remote:URL")
        p.add_argument("--search-fixture", dest="search_fixture")
        p.add_argument("--pages-fixture", dest="pages_fixture")
        p.add_argument("--search-endpoint", dest="search_endpoint")
        p.add_argument("--workers", type=int)
        p.add_argument("--no-temporal-filter", action="store_true")

    p = sub.add_parser("rollout", help="roll a policy over benchmark items")
    add_rollout_args(p)
    p.add_argument("--out", required=True, help="trajectory JSONL to write")
    p.set_defaults(handler=_cmd_rollout)

    p = sub.add_parser("score", help="score saved trajectories against items")
    p.add_argument("--items", required=True)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--out", help="write the full report as JSON")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("bench", help="rollout plus scoring in one step")
    add_rollout_args(p)
    p.add_argument("--out", help="write the full report as JSON")
    p.add_argument("--out-trajectories", help="also write trajectories")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_bench)

    p = sub.add_parser("advantages", help="advantages and objective for a rollout group")
    p.add_argument("--group", required=True, help="rollout group JSON file")
    p.set_defaults(handler=_cmd_advantages)

    p = sub.add_parser("serve", help="serve the retrieval API over HTTP")
    add_corpus_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, CorpusError, AnalysisError, ScoringError, RolloutError) as exc:
        return _fail(str(exc))
    except FileNotFoundError as exc:
        return _fail(str(exc))
    except ValueError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
