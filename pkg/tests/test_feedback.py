import json
import random
from collections import Counter

import pytest

from jobstd.feedback import (
    DuplicateEventId,
    EventLog,
    FeedbackEvent,
    InvalidEvent,
    RetrainConfig,
    aggregate,
    load_examples,
    retrain,
    save_examples,
    to_training_examples,
)
from jobstd.features import NUM_FEATURES, MarketStats
from jobstd.ranker import load_model
from jobstd.taxonomy import EntityType

SNAP = tuple(0.1 * i for i in range(NUM_FEATURES))


def event(event_id, action, entity_id="s1", suggestion_id="sug1", replacement=None,
          industry="tech", snapshot=SNAP):
    return FeedbackEvent(
        event_id=event_id,
        suggestion_id=suggestion_id,
        posting_id="p1",
        entity_type=EntityType.SKILL,
        entity_id=entity_id,
        action=action,
        industry=industry,
        feature_snapshot=snapshot,
        replacement_entity_id=replacement,
    )


# --- event invariants --------------------------------------------------------


def test_overridden_requires_replacement():
    with pytest.raises(InvalidEvent):
        event("e1", "overridden")
    with pytest.raises(InvalidEvent):
        event("e1", "overridden", replacement="s1")  # same id
    event("e1", "overridden", replacement="s2")  # ok


def test_replacement_only_with_overridden():
    with pytest.raises(InvalidEvent):
        event("e1", "accepted", replacement="s2")


def test_snapshot_length_checked():
    with pytest.raises(InvalidEvent):
        event("e1", "accepted", snapshot=(0.0,) * 3)


# --- log append/read ---------------------------------------------------------


def test_append_then_read(tmp_path):
    log = EventLog(tmp_path / "log.jsonl")
    log.append(event("e1", "accepted"))
    events = log.read_all()
    assert len(events) == 1
    assert events[0] == event("e1", "accepted")


def test_duplicate_event_id(tmp_path):
    log = EventLog(tmp_path / "log.jsonl")
    log.append(event("e1", "accepted"))
    with pytest.raises(DuplicateEventId):
        log.append(event("e1", "rejected"))


def test_many_appends_round_trip(tmp_path):
    log = EventLog(tmp_path / "log.jsonl")
    rng = random.Random(0)
    written = []
    for i in range(1000):
        action = rng.choice(["shown", "accepted", "rejected"])
        e = event(f"e{i}", action, entity_id=f"s{rng.randint(1, 20)}",
                  suggestion_id=f"sug{i // 5}")
        log.append(e)
        written.append(e)
    # fresh reader sees every event verbatim, in order
    again = EventLog(tmp_path / "log.jsonl")
    assert again.read_all() == written


def test_append_only_previous_lines_untouched(tmp_path):
    path = tmp_path / "log.jsonl"
    log = EventLog(path)
    log.append(event("e1", "accepted"))
    first = path.read_text()
    log.append(event("e2", "rejected"))
    assert path.read_text().startswith(first)


# --- aggregate ---------------------------------------------------------------


def test_aggregate_empty():
    stats = aggregate([])
    assert stats.total == 0 and not stats.acceptance


def test_aggregate_counting():
    events = [event(f"e{i}", "accepted") for i in range(3)] + [event("e3", "rejected")]
    stats = aggregate(events)
    shown, accepted = stats.counters(EntityType.SKILL, "s1", "tech")
    assert (shown, accepted) == (4, 3)
    assert stats.total == 3
    assert stats.pair_counts[("tech", ("skill", "s1"))] == 3


def test_aggregate_counting_oracle_on_synthetic_log(tmp_path):
    rng = random.Random(1)
    events = []
    for i in range(5000):
        action = rng.choice(["shown", "accepted", "rejected", "overridden"])
        replacement = f"r{rng.randint(0, 5)}" if action == "overridden" else None
        events.append(
            event(f"e{i}", action, entity_id=f"s{rng.randint(1, 10)}",
                  industry=rng.choice(["tech", "finance", ""]), replacement=replacement)
        )
    stats = aggregate(events)
    # independent counting script
    shown = Counter()
    accepted = Counter()
    pair = Counter()
    for e in events:
        key = (e.entity_type.value, e.entity_id, e.industry)
        shown[key] += 1
        if e.action == "accepted":
            accepted[key] += 1
            pair[(e.industry, (e.entity_type.value, e.entity_id))] += 1
    for key in shown:
        assert stats.counters(EntityType(key[0]), key[1], key[2]) == (shown[key], accepted[key])
    assert dict(stats.pair_counts) == dict(pair)
    assert stats.total == sum(pair.values())
    stats.check()
    # prefix invariant: accepted <= shown at every prefix
    prefix = MarketStats()
    from jobstd.feedback import apply_event

    for e in events:
        apply_event(prefix, e)
        prefix.check()


def test_market_stats_round_trip():
    events = [event(f"e{i}", "accepted", entity_id=f"s{i % 3}") for i in range(10)]
    stats = aggregate(events)
    again = MarketStats.from_dict(json.loads(json.dumps(stats.to_dict())))
    assert again.to_dict() == stats.to_dict()
    assert again.total == stats.total


# --- to_training_examples ----------------------------------------------------


def test_examples_labels_basic():
    events = [event("e1", "accepted"), event("e2", "accepted"), event("e3", "rejected")]
    exs = to_training_examples(events)
    assert [ex.label for ex in exs] == [1, 1, 0]
    assert all(ex.source == "feedback" for ex in exs)


def test_override_without_served_replacement():
    events = [event("e1", "overridden", replacement="s_not_served")]
    exs = to_training_examples(events)
    assert len(exs) == 1 and exs[0].label == 0


def test_override_with_served_replacement():
    other_snap = tuple(float(i) for i in range(NUM_FEATURES))
    events = [
        event("e0", "shown", entity_id="s2", snapshot=other_snap),
        event("e1", "overridden", entity_id="s1", replacement="s2"),
    ]
    exs = to_training_examples(events)
    assert len(exs) == 2
    assert exs[0].label == 0
    assert exs[1].label == 1
    assert tuple(exs[1].features.to_list()) == other_snap


def test_examples_rule_by_rule_oracle():
    rng = random.Random(6)
    events = []
    served = {}
    for i in range(500):
        sug = f"sug{i // 4}"
        eid = f"s{rng.randint(1, 8)}"
        action = rng.choice(["shown", "accepted", "rejected", "overridden"])
        replacement = None
        if action == "overridden":
            replacement = f"s{rng.randint(1, 8)}"
            if replacement == eid:
                action = "rejected"
                replacement = None
        snap = tuple(rng.random() for _ in range(NUM_FEATURES))
        events.append(event(f"e{i}", action, entity_id=eid, suggestion_id=sug,
                            replacement=replacement, snapshot=snap))
        served[(sug, eid)] = snap
    got = Counter((tuple(ex.features.to_list()), ex.label) for ex in to_training_examples(events))
    expected = Counter()
    snapshots = {(e.suggestion_id, e.entity_id): e.feature_snapshot for e in events}
    for e in events:
        if e.action == "accepted":
            expected[(e.feature_snapshot, 1)] += 1
        elif e.action == "rejected":
            expected[(e.feature_snapshot, 0)] += 1
        elif e.action == "overridden":
            expected[(e.feature_snapshot, 0)] += 1
            key = (e.suggestion_id, e.replacement_entity_id)
            if key in snapshots:
                expected[(snapshots[key], 1)] += 1
    assert got == expected


# --- examples file round trip ------------------------------------------------


def test_examples_file_round_trip(tmp_path, seed_corpus):
    _, examples = seed_corpus
    path = tmp_path / "ex.jsonl"
    data = examples[EntityType.COMPANY][:50]
    save_examples(data, path)
    assert load_examples(path) == data


# --- retrain -----------------------------------------------------------------


def test_retrain_empty_log_trains_on_seed(tmp_path, seed_corpus):
    _, examples = seed_corpus
    log = EventLog(tmp_path / "log.jsonl")
    model, stats, model_path, stats_path = retrain(
        log, examples[EntityType.SKILL], RetrainConfig(kind="linear"), tmp_path / "models"
    )
    assert model_path.name == "skill_v2.json"
    assert stats.total == 0
    assert load_model(model_path) is not None


def test_retrain_deterministic(tmp_path, seed_corpus):
    _, examples = seed_corpus
    log = EventLog(tmp_path / "log.jsonl")
    for i in range(20):
        log.append(event(f"e{i}", "accepted" if i % 2 else "rejected", entity_id=f"s{i % 4}"))
    seed = examples[EntityType.SKILL][:100]
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    *_, path_a, _ = retrain(log, seed, RetrainConfig(kind="gbdt", num_trees=5), out_a)
    *_, path_b, _ = retrain(log, seed, RetrainConfig(kind="gbdt", num_trees=5), out_b)
    assert path_a.read_bytes() == path_b.read_bytes()


def test_retrain_does_not_mutate_previous(tmp_path, seed_corpus):
    _, examples = seed_corpus
    out = tmp_path / "models"
    log = EventLog(tmp_path / "log.jsonl")
    seed = examples[EntityType.SKILL][:100]
    *_, first_path, _ = retrain(log, seed, RetrainConfig(), out, previous_version=1)
    before = first_path.read_bytes()
    log.append(event("e1", "accepted"))
    retrain(log, seed, RetrainConfig(), out, previous_version=2)
    assert first_path.read_bytes() == before
