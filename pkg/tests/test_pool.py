"""Strategy pool: delta semantics, eviction, and file round-trips."""

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elite.embedding import LocalHashEmbedder, LocalHashEmbedderConfig
from elite.pool import (
    MAX_CONTENT_CHARS,
    Add,
    PoolLoadError,
    Remove,
    Revise,
    StrategyEntry,
    StrategyKind,
    StrategyPool,
    apply_delta,
    evict_least_recently_retrieved,
    load_pool,
    new_pool,
    save_pool,
)

EMBEDDER = LocalHashEmbedder(LocalHashEmbedderConfig(dim=8))


def _pool_with(n: int) -> StrategyPool:
    pool = new_pool(8)
    ops = [
        Add(content=f"strategy {i}", kind=StrategyKind.RAW, plan_trace=f"plan {i}")
        for i in range(n)
    ]
    pool, rejected = apply_delta(pool, ops, episode=1, embed=EMBEDDER.embed)
    assert rejected == []
    return pool


def test_new_pool_rejects_bad_dim():
    with pytest.raises(ValueError):
        new_pool(0)


def test_add_creates_entry_with_plan_trace_embedding():
    pool = new_pool(8)
    op = Add(
        content="wash before placing",
        kind=StrategyKind.SUCCESS_PATTERN,
        plan_trace="- go to sink\n- wash\n- place",
        instruction="Put a clean plate on the counter.",
    )
    new, rejected = apply_delta(pool, [op], episode=3, embed=EMBEDDER.embed)
    assert rejected == []
    assert len(new) == 1 and len(pool) == 0  # input untouched
    entry = new.entries[0]
    assert entry.id == 1
    assert entry.content == "wash before placing"
    assert entry.kind is StrategyKind.SUCCESS_PATTERN
    assert entry.created_episode == 3
    assert entry.revised_episode is None
    assert entry.instruction == "Put a clean plate on the counter."
    assert entry.embedding == EMBEDDER.embed(op.plan_trace)
    assert new.next_id == 2
    assert new.version == pool.version + 1


def test_version_bumps_exactly_once_per_batch():
    pool = _pool_with(2)
    version = pool.version
    ops = [
        Add(content="a", kind=StrategyKind.RAW, plan_trace="p"),
        Remove(target_id=1),
        Revise(target_id=2, new_content="b"),
    ]
    new, _ = apply_delta(pool, ops, episode=2, embed=EMBEDDER.embed)
    assert new.version == version + 1
    # even an all-rejected batch is one consolidation round
    new2, rejected = apply_delta(new, [Remove(target_id=999)], episode=3, embed=EMBEDDER.embed)
    assert new2.version == version + 2
    assert rejected == [(Remove(target_id=999), "unknown id")]


def test_add_rejections():
    pool = new_pool(8)
    bad_content = Add(content="   ", kind=StrategyKind.RAW, plan_trace="p")
    bad_trace = Add(content="x", kind=StrategyKind.RAW, plan_trace="  ")
    new, rejected = apply_delta(pool, [bad_content, bad_trace], episode=1, embed=EMBEDDER.embed)
    assert len(new) == 0
    assert rejected == [(bad_content, "empty content"), (bad_trace, "missing plan trace")]


def test_content_clipped_to_cap():
    pool = new_pool(8)
    op = Add(content="x" * (MAX_CONTENT_CHARS + 500), kind=StrategyKind.RAW, plan_trace="p")
    new, _ = apply_delta(pool, [op], episode=1, embed=EMBEDDER.embed)
    assert len(new.entries[0].content) == MAX_CONTENT_CHARS


def test_revise_keeps_embedding_and_marks_episode():
    pool = _pool_with(2)
    original = pool.get(1)
    op = Revise(target_id=1, new_content="sharper wording", new_kind=StrategyKind.FAILURE_SUMMARY)
    new, rejected = apply_delta(pool, [op], episode=7, embed=EMBEDDER.embed)
    assert rejected == []
    entry = new.get(1)
    assert entry.content == "sharper wording"
    assert entry.kind is StrategyKind.FAILURE_SUMMARY
    assert entry.embedding == original.embedding
    assert entry.plan_trace == original.plan_trace
    assert entry.created_episode == original.created_episode
    assert entry.revised_episode == 7
    # kind omitted -> kept
    new2, _ = apply_delta(new, [Revise(target_id=2, new_content="z")], episode=8, embed=EMBEDDER.embed)
    assert new2.get(2).kind is pool.get(2).kind


def test_revise_and_remove_rejections():
    pool = _pool_with(1)
    ops = [
        Revise(target_id=42, new_content="x"),
        Revise(target_id=1, new_content=" "),
        Remove(target_id=42),
        "not an op",
    ]
    new, rejected = apply_delta(pool, ops, episode=2, embed=EMBEDDER.embed)
    assert len(new) == 1
    reasons = [reason for _, reason in rejected]
    assert reasons == ["unknown id", "empty content", "unknown id", "malformed op"]


def test_remove_deletes_entry():
    pool = _pool_with(3)
    new, rejected = apply_delta(pool, [Remove(target_id=2)], episode=2, embed=EMBEDDER.embed)
    assert rejected == []
    assert new.ids() == [1, 3]
    assert new.get(2) is None
    # removed ids are never reused
    new2, _ = apply_delta(new, [Add(content="c", kind=StrategyKind.RAW, plan_trace="p")], episode=3, embed=EMBEDDER.embed)
    assert new2.ids() == [1, 3, 4]


def test_embedder_dim_mismatch_raises():
    pool = new_pool(16)
    op = Add(content="x", kind=StrategyKind.RAW, plan_trace="p")
    with pytest.raises(ValueError):
        apply_delta(pool, [op], episode=1, embed=EMBEDDER.embed)  # embedder is dim 8


def test_eviction_order_and_ties():
    pool = _pool_with(5)
    # 2 and 4 were retrieved recently; 1, 3, 5 never (count as episode 0)
    kept, evicted = evict_least_recently_retrieved(pool, 3, {2: 5, 4: 1})
    assert evicted == [1, 3]  # ties on episode 0 evict the smaller id first
    assert kept.ids() == [2, 4, 5]
    assert kept.version == pool.version  # eviction is not a consolidation round
    assert kept.next_id == pool.next_id


def test_eviction_noop_under_cap():
    pool = _pool_with(2)
    kept, evicted = evict_least_recently_retrieved(pool, 5, {})
    assert kept is pool
    assert evicted == []
    with pytest.raises(ValueError):
        evict_least_recently_retrieved(pool, 0, {})


def test_save_load_round_trip_is_exact(tmp_path):
    pool = _pool_with(3)
    pool, _ = apply_delta(
        pool,
        [Revise(target_id=2, new_content="revised text", new_kind=StrategyKind.AVOIDANCE_GUIDELINE)],
        episode=4,
        embed=EMBEDDER.embed,
    )
    path = tmp_path / "pool.jsonl"
    save_pool(pool, path)
    loaded = load_pool(path)
    assert loaded.dim == pool.dim
    assert loaded.next_id == pool.next_id
    assert loaded.version == pool.version
    assert loaded.entries == pool.entries
    # a second save of the loaded pool is byte-identical
    path2 = tmp_path / "pool2.jsonl"
    save_pool(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_load_tolerates_blank_lines(tmp_path):
    pool = _pool_with(2)
    path = tmp_path / "pool.jsonl"
    save_pool(pool, path)
    lines = path.read_text().splitlines()
    lines.insert(1, "")
    path.write_text("\n".join(lines) + "\n")
    assert load_pool(path).ids() == [1, 2]


def _write_pool_file(tmp_path, header: dict, entry_lines: list[str]):
    path = tmp_path / "bad.jsonl"
    lines = [json.dumps(header)] + entry_lines
    path.write_text("\n".join(lines) + "\n")
    return path


def _entry_line(**overrides) -> str:
    record = {
        "id": 1,
        "content": "c",
        "kind": "raw",
        "plan_trace": "p",
        "embedding": [1.0] + [0.0] * 7,
        "created_episode": 1,
        "revised_episode": None,
        "instruction": "",
    }
    record.update(overrides)
    return json.dumps(record)


HEADER = {"format_version": 1, "dim": 8, "next_id": 3, "version": 1}


def test_load_error_reporting(tmp_path):
    cases = [
        ("", "line 1: missing header"),
        ("not json\n", "line 1: malformed header"),
    ]
    for text, fragment in cases:
        path = tmp_path / "f.jsonl"
        path.write_text(text)
        with pytest.raises(PoolLoadError, match=fragment):
            load_pool(path)

    checks = [
        (dict(HEADER, format_version=2), [], "unsupported format_version 2"),
        (dict(HEADER, dim=0), [], "dim must be positive"),
        (HEADER, ["{oops"], "line 2: invalid JSON"),
        (HEADER, ['{"id": 1}'], "line 2: malformed entry"),
        (HEADER, [_entry_line(kind="wisdom")], "line 2: malformed entry"),
        (HEADER, [_entry_line(embedding=[1.0, 0.0])], "line 2: embedding has length 2"),
        (HEADER, [_entry_line(content="   ")], "line 2: empty content"),
        (HEADER, [_entry_line(embedding=[float("inf")] + [0.0] * 7)], "line 2: non-finite"),
        (HEADER, [_entry_line(), _entry_line()], "line 3: duplicate id 1"),
        (HEADER, [_entry_line(id=3)], "line 2: id 3 not below header next_id 3"),
    ]
    for header, entries, fragment in checks:
        path = _write_pool_file(tmp_path, header, entries)
        with pytest.raises(PoolLoadError, match=fragment):
            load_pool(path)


def test_load_missing_file():
    with pytest.raises(PoolLoadError, match="cannot read"):
        load_pool("/nonexistent/pool.jsonl")


def test_float_precision_survives_round_trip(tmp_path):
    pool = new_pool(8)
    op = Add(content="precision", kind=StrategyKind.RAW, plan_trace="heat the potato in the microwave")
    pool, _ = apply_delta(pool, [op], episode=1, embed=EMBEDDER.embed)
    path = tmp_path / "pool.jsonl"
    save_pool(pool, path)
    assert load_pool(path).entries[0].embedding == pool.entries[0].embedding


_OP_STRATEGY = st.one_of(
    st.builds(
        Add,
        content=st.text(max_size=12),
        kind=st.sampled_from(list(StrategyKind)),
        plan_trace=st.sampled_from(["", "plan a", "plan b"]),
    ),
    st.builds(Revise, target_id=st.integers(0, 8), new_content=st.text(max_size=8)),
    st.builds(Remove, target_id=st.integers(0, 8)),
)


@given(st.lists(_OP_STRATEGY, max_size=12))
@settings(max_examples=120, deadline=None)
def test_delta_application_matches_reference_model(ops):
    pool = _pool_with(3)
    new, rejected = apply_delta(pool, ops, episode=5, embed=EMBEDDER.embed)

    # reference interpreter with the documented skip-and-report semantics
    ref = {e.id: (e.content, e.kind) for e in pool.entries}
    next_id = pool.next_id
    expected_rejects = 0
    for op in ops:
        if isinstance(op, Add):
            if not op.content.strip() or not op.plan_trace.strip():
                expected_rejects += 1
                continue
            ref[next_id] = (op.content.strip()[:MAX_CONTENT_CHARS], op.kind)
            next_id += 1
        elif isinstance(op, Revise):
            if not op.new_content.strip():
                expected_rejects += 1
                continue
            if op.target_id not in ref:
                expected_rejects += 1
                continue
            ref[op.target_id] = (op.new_content.strip()[:MAX_CONTENT_CHARS], ref[op.target_id][1])
        else:
            if op.target_id not in ref:
                expected_rejects += 1
                continue
            del ref[op.target_id]

    assert len(rejected) == expected_rejects
    assert {e.id: (e.content, e.kind) for e in new.entries} == ref
    assert new.next_id == next_id
    assert new.version == pool.version + 1
    ids = new.ids()
    assert ids == sorted(ids) and len(set(ids)) == len(ids)
    assert all(i < new.next_id for i in ids)
    # the input pool was not mutated
    assert pool.ids() == [1, 2, 3] and pool.version == 1
