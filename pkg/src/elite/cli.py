"""Command-line entry point.

Subcommands mirror the harness operations; every run-level flag can also be
supplied through a JSON config file, with explicit command-line flags taking
precedence. Runs against a real model require the chat endpoint flags; the
embedder defaults to the local hashing embedder so offline runs need no
embedding service.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from elite._http import TransportError
from elite.backends import RemoteChatBackend, RemoteChatConfig
from elite.embedding import (
    LocalHashEmbedder,
    LocalHashEmbedderConfig,
    RemoteEmbedder,
    RemoteEmbedderConfig,
)
from elite.gridhouse import builtin_suites, export_suite, import_suite
from elite.harness import (
    RunConfig,
    RunMode,
    eval_frozen,
    metrics_table,
    run_ablation,
    run_online,
    run_supervised,
)
from elite.pool import load_pool
from elite.retrieval import DEFAULT_K, RetrievalMode

logger = logging.getLogger(__name__)

# flag name -> hard default, used when neither the CLI nor the config file sets it
_RUN_DEFAULTS = {
    "seed": 0,
    "k": DEFAULT_K,
    "retrieval_mode": "cot",
    "pool": None,
    "run_dir": None,
    "t_max": None,
    "suite": "builtin",
    "suite_seed": None,
    "disable_consolidation": False,
    "disable_retrieval": False,
    "pool_cap": None,
    "dump_prompts": False,
    "resume": False,
    "chat_base_url": None,
    "chat_model": None,
    "chat_api_key": "",
    "embed_base_url": None,
    "embed_model": None,
    "embed_dim": None,
}


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; explicit flags override it")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--k", type=int)
    parser.add_argument("--retrieval-mode", choices=[m.value for m in RetrievalMode])
    parser.add_argument("--pool", help="strategy pool file to write (or read for eval-frozen)")
    parser.add_argument("--run-dir", help="directory for run artifacts")
    parser.add_argument("--t-max", type=int, help="override every task's step budget")
    parser.add_argument("--suite", help="'builtin' or a directory of task files")
    parser.add_argument("--suite-seed", type=int, help="seed for builtin task generation (defaults to --seed)")
    parser.add_argument("--disable-consolidation", action=argparse.BooleanOptionalAction)
    parser.add_argument("--disable-retrieval", action=argparse.BooleanOptionalAction)
    parser.add_argument("--pool-cap", type=int)
    parser.add_argument("--dump-prompts", action=argparse.BooleanOptionalAction,
                        help="write every rendered prompt/reply pair to the run dir")
    parser.add_argument("--resume", action=argparse.BooleanOptionalAction,
                        help="continue from the pool file instead of starting empty")
    parser.add_argument("--chat-base-url")
    parser.add_argument("--chat-model")
    parser.add_argument("--chat-api-key")
    parser.add_argument("--embed-base-url", help="remote embeddings endpoint (omit for the local embedder)")
    parser.add_argument("--embed-model")
    parser.add_argument("--embed-dim", type=int)


def _resolve(args: argparse.Namespace) -> dict:
    """Merge CLI flags over config-file values over hard defaults."""
    file_values: dict = {}
    if args.config:
        file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(file_values, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = sorted(set(file_values) - set(_RUN_DEFAULTS))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    resolved = {}
    for key, default in _RUN_DEFAULTS.items():
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            resolved[key] = cli_value
        elif key in file_values:
            resolved[key] = file_values[key]
        else:
            resolved[key] = default
    if resolved["suite_seed"] is None:
        resolved["suite_seed"] = resolved["seed"]
    return resolved


def _run_config(resolved: dict, mode: RunMode) -> RunConfig:
    config = RunConfig(
        mode=mode,
        retrieval_mode=RetrievalMode(resolved["retrieval_mode"]),
        k=int(resolved["k"]),
        seed=int(resolved["seed"]),
        pool_path=resolved["pool"],
        run_dir=resolved["run_dir"],
        t_max_override=resolved["t_max"],
        disable_consolidation=bool(resolved["disable_consolidation"]),
        disable_retrieval=bool(resolved["disable_retrieval"]),
        pool_cap=resolved["pool_cap"],
        dump_prompts=bool(resolved["dump_prompts"]),
        resume=bool(resolved["resume"]),
    )
    config.validate()
    return config


def _chat_backend(resolved: dict) -> RemoteChatBackend:
    if not resolved["chat_base_url"] or not resolved["chat_model"]:
        raise ValueError("chat backend not configured: --chat-base-url and --chat-model are required")
    return RemoteChatBackend(
        RemoteChatConfig(
            base_url=resolved["chat_base_url"],
            model=resolved["chat_model"],
            api_key=resolved["chat_api_key"] or "",
        )
    )


def _embedder(resolved: dict):
    if resolved["embed_base_url"]:
        if not resolved["embed_model"]:
            raise ValueError("--embed-model is required with --embed-base-url")
        dim = resolved["embed_dim"] or 1024
        return RemoteEmbedder(
            RemoteEmbedderConfig(
                base_url=resolved["embed_base_url"],
                model=resolved["embed_model"],
                dim=dim,
            )
        )
    dim = resolved["embed_dim"] or 256
    return LocalHashEmbedder(LocalHashEmbedderConfig(dim=dim))


def _load_suite(resolved: dict):
    suite = resolved["suite"]
    if suite == "builtin":
        return builtin_suites(int(resolved["suite_seed"]))
    return import_suite(suite)


def _cmd_run_online(args: argparse.Namespace) -> int:
    resolved = _resolve(args)
    config = _run_config(resolved, RunMode.ONLINE)
    result = run_online(config, _load_suite(resolved), _chat_backend(resolved), _embedder(resolved))
    print(metrics_table(result.metrics))
    if config.run_dir:
        print(f"artifacts written to {config.run_dir}")
    return 0


def _cmd_run_supervised(args: argparse.Namespace) -> int:
    resolved = _resolve(args)
    config = _run_config(resolved, RunMode.SUPERVISED)
    result = run_supervised(config, _load_suite(resolved), _chat_backend(resolved), _embedder(resolved))
    print("training (seen halves):")
    print(metrics_table(result.train_metrics))
    print("frozen evaluation (unseen halves):")
    print(metrics_table(result.eval_metrics))
    if result.skipped:
        print(f"skipped (no oracle): {', '.join(result.skipped)}")
    if config.run_dir:
        print(f"artifacts written to {config.run_dir}")
    return 0


def _cmd_eval_frozen(args: argparse.Namespace) -> int:
    resolved = _resolve(args)
    config = _run_config(resolved, RunMode.EVAL_FROZEN)
    result = eval_frozen(config, _load_suite(resolved), _chat_backend(resolved), _embedder(resolved))
    print(metrics_table(result.metrics))
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    resolved = _resolve(args)
    config = _run_config(resolved, RunMode.ONLINE)
    tasks = _load_suite(resolved)
    embedder = _embedder(resolved)
    result = run_ablation(config, tasks, lambda: _chat_backend(resolved), embedder)
    print(result.table)
    if config.run_dir:
        print(f"artifacts written to {config.run_dir}")
    return 0


def _cmd_tasks_export(args: argparse.Namespace) -> int:
    tasks = builtin_suites(args.seed)
    paths = export_suite(tasks, args.out)
    print(f"wrote {len(paths)} task files to {args.out}")
    return 0


def _cmd_tasks_import(args: argparse.Namespace) -> int:
    tasks = import_suite(args.dir)
    counts: dict[str, int] = {}
    for task in tasks:
        counts[task.category.value] = counts.get(task.category.value, 0) + 1
    print(f"loaded {len(tasks)} valid tasks from {args.dir}")
    for category in sorted(counts):
        print(f"  {category}: {counts[category]}")
    return 0


def _cmd_pool_show(args: argparse.Namespace) -> int:
    pool = load_pool(args.pool)
    print(f"pool version {pool.version}, dim {pool.dim}, {len(pool)} entries")
    for entry in pool.entries[: args.limit]:
        content = entry.content if len(entry.content) <= 120 else entry.content[:119] + "…"
        print(f"[{entry.id}] ({entry.kind.value}) {content}")
    if len(pool) > args.limit:
        print(f"... {len(pool) - args.limit} more")
    return 0


def _cmd_pool_stats(args: argparse.Namespace) -> int:
    pool = load_pool(args.pool)
    kinds: dict[str, int] = {}
    for entry in pool.entries:
        kinds[entry.kind.value] = kinds.get(entry.kind.value, 0) + 1
    print(f"entries: {len(pool)}")
    print(f"dim: {pool.dim}")
    print(f"version: {pool.version}")
    print(f"next_id: {pool.next_id}")
    for kind in sorted(kinds):
        print(f"  {kind}: {kinds[kind]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elite",
        description="Self-improving household agent with an evolving strategy pool",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, handler in (
        ("run-online", _cmd_run_online),
        ("run-supervised", _cmd_run_supervised),
        ("eval-frozen", _cmd_eval_frozen),
        ("ablate", _cmd_ablate),
    ):
        p = sub.add_parser(name)
        _add_run_flags(p)
        p.set_defaults(func=handler)

    tasks = sub.add_parser("tasks")
    tasks_sub = tasks.add_subparsers(dest="tasks_command", required=True)
    export = tasks_sub.add_parser("export")
    export.add_argument("--out", required=True)
    export.add_argument("--seed", type=int, default=0)
    export.set_defaults(func=_cmd_tasks_export)
    imp = tasks_sub.add_parser("import")
    imp.add_argument("--dir", required=True)
    imp.set_defaults(func=_cmd_tasks_import)

    pool = sub.add_parser("pool")
    pool_sub = pool.add_subparsers(dest="pool_command", required=True)
    show = pool_sub.add_parser("show")
    show.add_argument("--pool", required=True)
    show.add_argument("--limit", type=int, default=20)
    show.set_defaults(func=_cmd_pool_show)
    stats = pool_sub.add_parser("stats")
    stats.add_argument("--pool", required=True)
    stats.set_defaults(func=_cmd_pool_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, TransportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
