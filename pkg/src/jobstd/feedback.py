"""User feedback loop: append-only event log, aggregation into market stats,
conversion to training examples, and retrain orchestration.

The log is a single JSON Lines file with single-writer discipline. Feature
snapshots are frozen into events at serving time so retraining always sees
the features the user actually saw.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .features import NUM_FEATURES, SCHEMA_VERSION, FeatureVector, MarketStats
from .ranker import TrainingExample, save_model, train_gbdt, train_linear
from .taxonomy import EntityType

ACTIONS = ("shown", "accepted", "rejected", "overridden")

FEEDBACK_WEIGHT = 2.0  # feedback beats annotator labels; config knob
SEED_WEIGHT = 1.0


class InvalidEvent(Exception):
    pass


class DuplicateEventId(Exception):
    pass


@dataclass(frozen=True)
class FeedbackEvent:
    event_id: str
    suggestion_id: str
    posting_id: str
    entity_type: EntityType
    entity_id: str
    action: str
    feature_snapshot: tuple[float, ...]
    industry: str = ""
    replacement_entity_id: str | None = None
    schema_version: int = SCHEMA_VERSION
    timestamp: int = 0  # milliseconds since epoch

    def __post_init__(self):
        if not self.event_id:
            raise InvalidEvent("event_id must be non-empty")
        if self.action not in ACTIONS:
            raise InvalidEvent(f"unknown action {self.action!r}")
        if self.action == "overridden":
            if not self.replacement_entity_id or self.replacement_entity_id == self.entity_id:
                raise InvalidEvent("overridden requires a distinct replacement_entity_id")
        elif self.replacement_entity_id is not None:
            raise InvalidEvent("replacement_entity_id only valid with overridden")
        if len(self.feature_snapshot) != NUM_FEATURES:
            raise InvalidEvent(
                f"feature snapshot length {len(self.feature_snapshot)} != {NUM_FEATURES}"
            )

    def to_dict(self) -> dict:
        out = {
            "event_id": self.event_id,
            "suggestion_id": self.suggestion_id,
            "posting_id": self.posting_id,
            "entity_type": self.entity_type.value,
            "entity_id": self.entity_id,
            "action": self.action,
            "industry": self.industry,
            "feature_snapshot": list(self.feature_snapshot),
            "schema_version": self.schema_version,
            "timestamp": self.timestamp,
        }
        if self.replacement_entity_id is not None:
            out["replacement_entity_id"] = self.replacement_entity_id
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "FeedbackEvent":
        return cls(
            event_id=obj["event_id"],
            suggestion_id=obj["suggestion_id"],
            posting_id=obj["posting_id"],
            entity_type=EntityType(obj["entity_type"]),
            entity_id=obj["entity_id"],
            action=obj["action"],
            industry=obj.get("industry", ""),
            feature_snapshot=tuple(float(v) for v in obj["feature_snapshot"]),
            replacement_entity_id=obj.get("replacement_entity_id"),
            schema_version=int(obj.get("schema_version", SCHEMA_VERSION)),
            timestamp=int(obj.get("timestamp", 0)),
        )


class EventLog:
    """Append-only JSON Lines event log. One writer; readers snapshot."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._ids: set[str] = set()
        if self.path.exists():
            for event in self.read_all():
                self._ids.add(event.event_id)

    def append(self, event: FeedbackEvent) -> None:
        if event.event_id in self._ids:
            raise DuplicateEventId(event.event_id)
        line = json.dumps(event.to_dict(), sort_keys=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._ids.add(event.event_id)

    def read_all(self) -> list[FeedbackEvent]:
        if not self.path.exists():
            return []
        out = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(FeedbackEvent.from_dict(json.loads(line)))
        return out

    def __len__(self) -> int:
        return len(self._ids)


def apply_event(stats: MarketStats, event: FeedbackEvent) -> None:
    """Fold one event into the counters; aggregate() replays the whole log."""
    stats.record_shown(event.entity_type, event.entity_id, event.industry)
    if event.action == "accepted":
        stats.record_accepted(event.entity_type, event.entity_id, event.industry)


def aggregate(events: list[FeedbackEvent]) -> MarketStats:
    stats = MarketStats()
    for event in events:
        apply_event(stats, event)
    return stats


def to_training_examples(events: list[FeedbackEvent]) -> list[TrainingExample]:
    """Accepted -> positive, Rejected/Overridden -> negative; an override also
    yields a positive for the replacement when its served snapshot is in the
    log under the same suggestion_id. Shown-only events produce nothing."""
    snapshots: dict[tuple[str, str, str], tuple[float, ...]] = {}
    for e in events:
        snapshots[(e.suggestion_id, e.entity_type.value, e.entity_id)] = e.feature_snapshot

    out: list[TrainingExample] = []

    def example(snapshot, label):
        return TrainingExample(
            features=FeatureVector.from_list(snapshot),
            label=label,
            weight=FEEDBACK_WEIGHT,
            source="feedback",
        )

    for e in events:
        if e.action == "accepted":
            out.append(example(e.feature_snapshot, 1))
        elif e.action == "rejected":
            out.append(example(e.feature_snapshot, 0))
        elif e.action == "overridden":
            out.append(example(e.feature_snapshot, 0))
            key = (e.suggestion_id, e.entity_type.value, e.replacement_entity_id)
            if key in snapshots:
                out.append(example(snapshots[key], 1))
    return out


@dataclass
class RetrainConfig:
    kind: str = "linear"  # "linear" | "gbdt"
    epochs: int = 500
    learning_rate: float = 0.1
    l2: float = 1e-4
    num_trees: int = 50
    max_depth: int = 3
    gbdt_learning_rate: float = 0.1
    min_leaf: int = 5


def load_examples(path: str | Path) -> list[TrainingExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(
                TrainingExample(
                    features=FeatureVector.from_list(obj["features"]),
                    label=int(obj["label"]),
                    weight=float(obj.get("weight", 1.0)),
                    source=obj.get("source", "seed"),
                )
            )
    return out


def save_examples(examples: list[TrainingExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "features": ex.features.to_list(),
                        "label": ex.label,
                        "weight": ex.weight,
                        "source": ex.source,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def train_with_config(data: list[TrainingExample], config: RetrainConfig):
    if config.kind == "linear":
        return train_linear(data, epochs=config.epochs, learning_rate=config.learning_rate, l2=config.l2)
    if config.kind == "gbdt":
        return train_gbdt(
            data,
            num_trees=config.num_trees,
            max_depth=config.max_depth,
            learning_rate=config.gbdt_learning_rate,
            min_leaf=config.min_leaf,
        )
    raise ValueError(f"unknown model kind {config.kind!r}")


def retrain(
    log: EventLog,
    seed_data: list[TrainingExample],
    config: RetrainConfig,
    out_dir: str | Path,
    entity_type: EntityType = EntityType.SKILL,
    previous_version: int = 1,
):
    """Train on seed plus feedback examples; write a new versioned model file
    and a fresh MarketStats snapshot. Never touches the previous artifacts."""
    events = log.read_all()
    data = list(seed_data) + to_training_examples(events)
    model = train_with_config(data, config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    version = previous_version + 1
    model_path = out_dir / f"{entity_type.value}_v{version}.json"
    save_model(model, model_path)
    stats = aggregate(events)
    stats_path = out_dir / f"market_stats_v{version}.json"
    with open(stats_path, "w", encoding="utf-8") as fh:
        json.dump(stats.to_dict(), fh, sort_keys=True)
        fh.write("\n")
    return model, stats, model_path, stats_path
