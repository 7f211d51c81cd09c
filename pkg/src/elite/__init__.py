"""Self-improving household agent: an evolving strategy pool, reflective
experience distillation, intent-aware retrieval, and a deterministic text
simulator to learn in."""

from elite.backends import ChatMessage, ChatRequest, RemoteChatBackend, ScriptedBackend, chat
from elite.consolidation import consolidate, propose_deltas
from elite.embedding import LocalHashEmbedder, LocalHashEmbedderConfig, RemoteEmbedder, cosine
from elite.gridhouse import (
    Action,
    Category,
    GridHouse,
    Subgoal,
    TaskSpec,
    WorldState,
    builtin_suites,
    reset,
)
from elite.harness import (
    Metrics,
    RunConfig,
    compute_metrics,
    eval_frozen,
    run_ablation,
    run_online,
    run_supervised,
)
from elite.planning import CoarsePlan, coarse_plan, next_action
from elite.pool import (
    Add,
    Remove,
    Revise,
    StrategyEntry,
    StrategyKind,
    StrategyPool,
    apply_delta,
    load_pool,
    new_pool,
    save_pool,
)
from elite.reflection import Insight, Outcome, Reflection, reflect, reflect_comparative
from elite.retrieval import RetrievalMode, retrieve, retrieve_scored

__all__ = [
    "Action",
    "Add",
    "Category",
    "ChatMessage",
    "ChatRequest",
    "CoarsePlan",
    "GridHouse",
    "Insight",
    "LocalHashEmbedder",
    "LocalHashEmbedderConfig",
    "Metrics",
    "Outcome",
    "Reflection",
    "Remove",
    "RemoteChatBackend",
    "RemoteEmbedder",
    "Revise",
    "RunConfig",
    "ScriptedBackend",
    "StrategyEntry",
    "StrategyKind",
    "StrategyPool",
    "Subgoal",
    "TaskSpec",
    "WorldState",
    "apply_delta",
    "builtin_suites",
    "chat",
    "coarse_plan",
    "compute_metrics",
    "consolidate",
    "cosine",
    "eval_frozen",
    "load_pool",
    "new_pool",
    "next_action",
    "propose_deltas",
    "reflect",
    "reflect_comparative",
    "reset",
    "retrieve",
    "retrieve_scored",
    "run_ablation",
    "run_online",
    "run_supervised",
    "save_pool",
]
