"""Run orchestration: the online learning loop, supervised training,
frozen evaluation, retrieval ablations, metrics, and run artifacts.

The online loop shuffles the task suite once (seeded), visits each task
exactly once, and for every episode: plans, embeds the plan, retrieves
from the pool as it stood after the previous episode, executes, reflects,
and consolidates. Per-episode failures degrade per the component
contracts; the loop itself never aborts. With a scripted backend an entire
run is reproducible byte-for-byte, so no artifact contains a timestamp.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

from elite._http import TransportError
from elite.backends import Backend, RecordingBackend
from elite.consolidation import consolidate, direct_adds
from elite.embedding import Embedder
from elite.gridhouse import TaskSpec, oracle_trajectory, reset, seen_unseen_split
from elite.planning import UNPARSEABLE_FEEDBACK, coarse_plan, next_action
from elite.pool import (
    Add,
    DeltaOp,
    Remove,
    Revise,
    StrategyPool,
    apply_delta,
    evict_least_recently_retrieved,
    load_pool,
    new_pool,
    save_pool,
)
from elite.prompts import DEFAULT_LIBRARY, PromptLibrary
from elite.reflection import (
    Outcome,
    ReflectionFailedError,
    reflect,
    reflect_comparative,
)
from elite.retrieval import DEFAULT_K, RetrievalMode, retrieve_scored
from elite.trajectory import Trajectory, TrajectoryStep

logger = logging.getLogger(__name__)

CHECKPOINT_EVERY = 10
ABLATION_ARMS = ("cot", "tfidf_content", "tfidf_instruction", "all", "random")


class RunMode(str, enum.Enum):
    ONLINE = "online"
    SUPERVISED = "supervised"
    EVAL_FROZEN = "eval_frozen"


@dataclass
class RunConfig:
    mode: RunMode = RunMode.ONLINE
    retrieval_mode: RetrievalMode = RetrievalMode.COT
    k: int = DEFAULT_K
    seed: int = 0
    pool_path: str | None = None
    run_dir: str | None = None
    t_max_override: int | None = None
    disable_consolidation: bool = False
    disable_retrieval: bool = False
    pool_cap: int | None = None
    dump_prompts: bool = False
    resume: bool = False

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.pool_cap is not None and self.pool_cap < 1:
            raise ValueError(f"pool_cap must be >= 1, got {self.pool_cap}")
        if self.t_max_override is not None and self.t_max_override < 1:
            raise ValueError(f"t_max_override must be >= 1, got {self.t_max_override}")

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["mode"] = self.mode.value
        data["retrieval_mode"] = self.retrieval_mode.value
        return data


@dataclass
class EpisodeRecord:
    index: int
    task_id: str
    category: str
    plan_raw: str
    plan_bullets: tuple[str, ...]
    plan_degraded: bool
    retrieved: tuple[tuple[int, float | None], ...]
    trajectory: tuple[TrajectoryStep, ...]
    outcome: Outcome
    progress: float
    aborted: bool
    reflection: dict | None
    consolidation: dict | None
    pool_size_after: int
    pool_version_after: int

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "task_id": self.task_id,
            "category": self.category,
            "plan": {
                "raw": self.plan_raw,
                "bullets": list(self.plan_bullets),
                "degraded": self.plan_degraded,
            },
            "retrieved": [{"id": i, "score": s} for i, s in self.retrieved],
            "trajectory": [
                {
                    "index": s.index,
                    "observation": s.observation,
                    "action": s.action,
                    "feedback": s.feedback,
                }
                for s in self.trajectory
            ],
            "outcome": self.outcome.value,
            "progress": self.progress,
            "aborted": self.aborted,
            "reflection": self.reflection,
            "consolidation": self.consolidation,
            "pool_size_after": self.pool_size_after,
            "pool_version_after": self.pool_version_after,
        }


@dataclass(frozen=True)
class CurvePoint:
    episode: int
    prefix_success_rate: float
    prefix_task_progress: float


@dataclass
class CategoryMetrics:
    count: int
    success_rate: float
    task_progress: float


@dataclass
class Metrics:
    defined: bool
    episodes: int
    success_rate: float
    task_progress: float
    per_category: dict[str, CategoryMetrics]
    curve: tuple[CurvePoint, ...]

    def to_dict(self) -> dict:
        return {
            "defined": self.defined,
            "episodes": self.episodes,
            "success_rate": self.success_rate,
            "task_progress": self.task_progress,
            "per_category": {
                name: {
                    "count": m.count,
                    "success_rate": m.success_rate,
                    "task_progress": m.task_progress,
                }
                for name, m in sorted(self.per_category.items())
            },
        }


def compute_metrics(records: list[EpisodeRecord]) -> Metrics:
    """Arithmetic means over episode outcomes and progress, with prefix-mean curves."""
    if not records:
        return Metrics(False, 0, 0.0, 0.0, {}, ())
    successes = 0
    progress_sum = 0.0
    curve = []
    for i, record in enumerate(records, start=1):
        successes += 1 if record.outcome is Outcome.SUCCESS else 0
        progress_sum += record.progress
        curve.append(CurvePoint(i, successes / i, progress_sum / i))
    per_category: dict[str, CategoryMetrics] = {}
    by_cat: dict[str, list[EpisodeRecord]] = {}
    for record in records:
        by_cat.setdefault(record.category, []).append(record)
    for name, group in by_cat.items():
        wins = sum(1 for r in group if r.outcome is Outcome.SUCCESS)
        per_category[name] = CategoryMetrics(
            count=len(group),
            success_rate=wins / len(group),
            task_progress=sum(r.progress for r in group) / len(group),
        )
    return Metrics(
        defined=True,
        episodes=len(records),
        success_rate=successes / len(records),
        task_progress=progress_sum / len(records),
        per_category=per_category,
        curve=tuple(curve),
    )


def metrics_table(metrics: Metrics) -> str:
    """Per-category breakdown as comma-separated rows (overall row last)."""
    lines = ["category,count,success_rate,task_progress"]
    for name, m in sorted(metrics.per_category.items()):
        lines.append(f"{name},{m.count},{m.success_rate:.4f},{m.task_progress:.4f}")
    lines.append(
        f"overall,{metrics.episodes},{metrics.success_rate:.4f},{metrics.task_progress:.4f}"
    )
    return "\n".join(lines)


def curve_csv(metrics: Metrics) -> str:
    lines = ["episode,prefix_success_rate,prefix_task_progress"]
    for point in metrics.curve:
        lines.append(
            f"{point.episode},{point.prefix_success_rate:.6f},{point.prefix_task_progress:.6f}"
        )
    return "\n".join(lines) + "\n"


@dataclass
class RunResult:
    pool: StrategyPool
    metrics: Metrics
    records: list[EpisodeRecord]


@dataclass
class SupervisedResult:
    pool: StrategyPool
    train_metrics: Metrics
    train_records: list[EpisodeRecord]
    eval_metrics: Metrics
    eval_records: list[EpisodeRecord]
    skipped: list[str]


@dataclass
class AblationResult:
    arms: dict[str, RunResult]
    table: str


class _ArtifactWriter:
    """Writes the run directory layout; every file is deterministic (no timestamps)."""

    def __init__(self, run_dir: str | Path) -> None:
        self.root = Path(run_dir)
        (self.root / "episodes").mkdir(parents=True, exist_ok=True)
        (self.root / "pools").mkdir(parents=True, exist_ok=True)

    def _dump(self, name: str, payload: dict) -> None:
        (self.root / name).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def write_config(self, config: RunConfig) -> None:
        self._dump("config.json", config.to_dict())

    def write_episode(self, record: EpisodeRecord) -> None:
        self._dump(f"episodes/episode_{record.index:04d}.json", record.to_dict())

    def checkpoint_pool(self, pool: StrategyPool, episode: int) -> None:
        save_pool(pool, self.root / "pools" / f"checkpoint_{episode:04d}.jsonl")

    def write_final(self, pool: StrategyPool, metrics: Metrics) -> None:
        save_pool(pool, self.root / "pool_final.jsonl")
        self._dump("metrics.json", metrics.to_dict())
        (self.root / "curve.csv").write_text(curve_csv(metrics), encoding="utf-8")

    def write_prompt_dump(self, transcript: list) -> None:
        lines = []
        for request, reply in transcript:
            lines.append(
                json.dumps(
                    {
                        "messages": [
                            {"role": m.role, "content": m.content} for m in request.messages
                        ],
                        "reply": reply,
                    },
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
        (self.root / "prompts.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _op_summary(op: DeltaOp) -> dict:
    if isinstance(op, Add):
        return {"op": "add", "kind": op.kind.value, "content": op.content}
    if isinstance(op, Revise):
        return {
            "op": "revise",
            "id": op.target_id,
            "kind": op.new_kind.value if op.new_kind else None,
            "content": op.new_content,
        }
    if isinstance(op, Remove):
        return {"op": "remove", "id": op.target_id}
    return {"op": "unknown"}


def _execute_episode(
    task: TaskSpec,
    strategies: list,
    backend: Backend,
    library: PromptLibrary,
    t_max_override: int | None,
) -> tuple[Trajectory, Outcome, float, bool]:
    env, _ = reset(task, t_max=t_max_override)
    steps: list[TrajectoryStep] = []
    aborted = False
    while not env.done:
        observation = env.observation
        try:
            choice = next_action(
                task.instruction,
                tuple(steps),
                strategies,
                env.valid_actions(),
                backend,
                library=library,
            )
        except TransportError as exc:
            logger.warning("episode %s aborted: %s", task.id, exc)
            aborted = True
            break
        result = env.step(choice.action)
        feedback = UNPARSEABLE_FEEDBACK if choice.unparseable else result.feedback
        steps.append(TrajectoryStep(len(steps), observation, choice.action.render(), feedback))
    outcome = Outcome.SUCCESS if env.reward() == 1.0 else Outcome.FAILURE
    return tuple(steps), outcome, env.goal_progress(), aborted


def _episode_rng(seed: int, episode: int) -> random.Random:
    return random.Random(seed * 1_000_003 + episode)


def _run_loop(
    config: RunConfig,
    tasks: list[TaskSpec],
    backend: Backend,
    embedder: Embedder,
    pool: StrategyPool,
    library: PromptLibrary,
    *,
    learn: bool,
    comparative: bool = False,
    writer: _ArtifactWriter | None = None,
) -> tuple[StrategyPool, list[EpisodeRecord]]:
    records: list[EpisodeRecord] = []
    last_retrieved: dict[int, int] = {}
    for n, task in enumerate(tasks, start=1):
        env, o0 = reset(task, t_max=config.t_max_override)
        plan = coarse_plan(task.instruction, o0, backend, library=library)
        query = embedder.embed(plan.raw_text)
        if config.disable_retrieval:
            scored = []
        else:
            scored = retrieve_scored(
                pool,
                config.retrieval_mode,
                config.k,
                query_vector=query,
                query_text=task.instruction,
                rng=_episode_rng(config.seed, n),
            )
        strategies = [entry for entry, _ in scored]
        for entry, _ in scored:
            last_retrieved[entry.id] = n

        steps, outcome, progress, aborted = _execute_episode(
            task, strategies, backend, library, config.t_max_override
        )

        reflection_summary: dict | None = None
        consolidation_summary: dict | None = None
        if learn:
            reflection = None
            if not steps:
                reflection_summary = {"failed": "no trajectory"}
            else:
                try:
                    if comparative and task.oracle:
                        reflection = reflect_comparative(
                            task.instruction,
                            steps,
                            oracle_trajectory(task),
                            outcome,
                            backend,
                            task_id=task.id,
                            library=library,
                        )
                    else:
                        reflection = reflect(
                            task.instruction,
                            steps,
                            outcome,
                            backend,
                            task_id=task.id,
                            library=library,
                        )
                except ReflectionFailedError as exc:
                    logger.warning("reflection failed for %s: %s", task.id, exc)
                    reflection_summary = {"failed": str(exc)}
            if reflection is not None:
                reflection_summary = {
                    "mode": reflection.mode.value,
                    "insights": [
                        {"kind": i.kind.value, "text": i.text} for i in reflection.insights
                    ],
                }
                if config.disable_consolidation:
                    ops = direct_adds(reflection, plan.raw_text, task.instruction)
                    pool, rejected = apply_delta(pool, list(ops), n, embedder.embed)
                    consolidation_summary = {
                        "mode": "direct_adds",
                        "proposed": [_op_summary(op) for op in ops],
                        "rejected": [
                            [_op_summary(op), reason] for op, reason in rejected
                        ],
                    }
                else:
                    pool, report = consolidate(
                        reflection,
                        pool,
                        n,
                        backend,
                        embedder.embed,
                        plan_trace=plan.raw_text,
                        instruction=task.instruction,
                        library=library,
                    )
                    consolidation_summary = {
                        "mode": "consolidator",
                        "fallback": report.result.fallback,
                        "proposed": [_op_summary(op) for op in report.result.proposed],
                        "rejected": [list(pair) for pair in report.result.rejected],
                        "apply_rejected": [
                            [_op_summary(op), reason] for op, reason in report.apply_rejected
                        ],
                    }
            if config.pool_cap is not None and len(pool) > config.pool_cap:
                pool, evicted = evict_least_recently_retrieved(
                    pool, config.pool_cap, last_retrieved
                )
                logger.info("pool cap %d evicted entries %s", config.pool_cap, evicted)

        record = EpisodeRecord(
            index=n,
            task_id=task.id,
            category=task.category.value,
            plan_raw=plan.raw_text,
            plan_bullets=plan.bullets,
            plan_degraded=plan.degraded,
            retrieved=tuple((entry.id, score) for entry, score in scored),
            trajectory=steps,
            outcome=outcome,
            progress=progress,
            aborted=aborted,
            reflection=reflection_summary,
            consolidation=consolidation_summary,
            pool_size_after=len(pool),
            pool_version_after=pool.version,
        )
        records.append(record)
        if writer is not None:
            writer.write_episode(record)
            if learn and n % CHECKPOINT_EVERY == 0:
                writer.checkpoint_pool(pool, n)
    return pool, records


def _start_pool(config: RunConfig, embedder: Embedder) -> StrategyPool:
    if config.resume and config.pool_path and Path(config.pool_path).exists():
        pool = load_pool(config.pool_path)
        if pool.dim != embedder.dim:
            raise ValueError(
                f"pool dim {pool.dim} does not match embedder dim {embedder.dim}"
            )
        return pool
    return new_pool(embedder.dim)


def _finish(
    config: RunConfig,
    pool: StrategyPool,
    records: list[EpisodeRecord],
    writer: _ArtifactWriter | None,
    recording: RecordingBackend | None,
) -> RunResult:
    metrics = compute_metrics(records)
    if writer is not None:
        writer.write_final(pool, metrics)
        if recording is not None:
            writer.write_prompt_dump(recording.transcript)
    if config.pool_path:
        save_pool(pool, config.pool_path)
    return RunResult(pool=pool, metrics=metrics, records=records)


def _prepare(config: RunConfig, backend: Backend):
    config.validate()
    writer = _ArtifactWriter(config.run_dir) if config.run_dir else None
    if writer is not None:
        writer.write_config(config)
    recording = None
    if config.dump_prompts:
        recording = RecordingBackend(backend)
        backend = recording
    return writer, recording, backend


def run_online(
    config: RunConfig,
    tasks: list[TaskSpec],
    backend: Backend,
    embedder: Embedder,
    *,
    library: PromptLibrary = DEFAULT_LIBRARY,
) -> RunResult:
    """Visit each task once in seeded shuffle order, learning as we go."""
    writer, recording, backend = _prepare(config, backend)
    order = list(tasks)
    random.Random(config.seed).shuffle(order)
    pool = _start_pool(config, embedder)
    pool, records = _run_loop(
        config, order, backend, embedder, pool, library, learn=True, writer=writer
    )
    return _finish(config, pool, records, writer, recording)


def run_supervised(
    config: RunConfig,
    tasks: list[TaskSpec],
    backend: Backend,
    embedder: Embedder,
    *,
    library: PromptLibrary = DEFAULT_LIBRARY,
) -> SupervisedResult:
    """Train with comparative reflection on seen halves, then frozen-eval the unseen halves."""
    writer, recording, backend = _prepare(config, backend)
    seen, unseen = seen_unseen_split(tasks)
    skipped = [task.id for task in seen if not task.oracle]
    for task_id in skipped:
        logger.warning("task %s has no oracle trajectory, skipping in supervised training", task_id)
    trainable = [task for task in seen if task.oracle]
    order = list(trainable)
    random.Random(config.seed).shuffle(order)
    pool = _start_pool(config, embedder)
    pool, train_records = _run_loop(
        config,
        order,
        backend,
        embedder,
        pool,
        library,
        learn=True,
        comparative=True,
        writer=writer,
    )
    eval_order = sorted(unseen, key=lambda t: t.id)
    pool, eval_records = _run_loop(
        config, eval_order, backend, embedder, pool, library, learn=False, writer=None
    )
    result = _finish(config, pool, train_records, writer, recording)
    eval_metrics = compute_metrics(eval_records)
    if writer is not None:
        writer._dump("eval_metrics.json", eval_metrics.to_dict())
        (writer.root / "eval_table.csv").write_text(
            metrics_table(eval_metrics) + "\n", encoding="utf-8"
        )
    return SupervisedResult(
        pool=result.pool,
        train_metrics=result.metrics,
        train_records=train_records,
        eval_metrics=eval_metrics,
        eval_records=eval_records,
        skipped=skipped,
    )


def eval_frozen(
    config: RunConfig,
    tasks: list[TaskSpec],
    backend: Backend,
    embedder: Embedder,
    *,
    library: PromptLibrary = DEFAULT_LIBRARY,
    pool: StrategyPool | None = None,
) -> RunResult:
    """Run episodes against an immutable pool: no reflection, no consolidation."""
    writer, recording, backend = _prepare(config, backend)
    if pool is None:
        if not config.pool_path or not Path(config.pool_path).exists():
            raise FileNotFoundError(
                "eval_frozen requires an existing pool file (pool_path)"
            )
        pool = load_pool(config.pool_path)
    order = sorted(tasks, key=lambda t: t.id)
    pool, records = _run_loop(
        config, order, backend, embedder, pool, library, learn=False, writer=writer
    )
    metrics = compute_metrics(records)
    if writer is not None:
        writer._dump("metrics.json", metrics.to_dict())
        (writer.root / "curve.csv").write_text(curve_csv(metrics), encoding="utf-8")
        if recording is not None:
            writer.write_prompt_dump(recording.transcript)
    return RunResult(pool=pool, metrics=metrics, records=records)


def run_ablation(
    config: RunConfig,
    tasks: list[TaskSpec],
    backend_factory,
    embedder: Embedder,
    *,
    library: PromptLibrary = DEFAULT_LIBRARY,
) -> AblationResult:
    """Run the five retrieval arms on identical seeds and tasks, then tabulate."""
    arms: dict[str, RunResult] = {}
    for arm in ABLATION_ARMS:
        arm_config = dataclasses.replace(
            config,
            retrieval_mode=RetrievalMode(arm),
            run_dir=str(Path(config.run_dir) / arm) if config.run_dir else None,
            pool_path=None,
        )
        arms[arm] = run_online(
            arm_config, tasks, backend_factory(), embedder, library=library
        )
    lines = ["arm,success_rate,task_progress"]
    for arm in ABLATION_ARMS:
        metrics = arms[arm].metrics
        lines.append(f"{arm},{metrics.success_rate:.4f},{metrics.task_progress:.4f}")
    table = "\n".join(lines)
    if config.run_dir:
        Path(config.run_dir).mkdir(parents=True, exist_ok=True)
        (Path(config.run_dir) / "ablation_table.csv").write_text(table + "\n", encoding="utf-8")
    return AblationResult(arms=arms, table=table)
