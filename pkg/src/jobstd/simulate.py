"""Closed-loop feedback simulation: a persona with fixed preferences reacts
to served suggestions, producing a synthetic event log for retraining and an
MRR harness to measure whether retraining actually moved the ranking.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .feedback import EventLog, FeedbackEvent, apply_event
from .features import EmbeddingTable, MarketStats, SentenceEncoder, extract
from .ranker import rank
from .sampledata import generate_posting
from .tagger import EntityType, JobPosting, build_matcher, tag
from .taxonomy import Taxonomy


@dataclass
class Persona:
    """A simulated user who accepts suggestions from a fixed entity subset
    and rejects everything else."""

    entity_type: EntityType
    accept_ids: frozenset[str]
    k: int = 10

    @classmethod
    def load(cls, path: str | Path) -> "Persona":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(
            entity_type=EntityType(obj.get("entity_type", "skill")),
            accept_ids=frozenset(obj["accept_ids"]),
            k=int(obj.get("k", 10)),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(
                {"entity_type": self.entity_type.value, "accept_ids": sorted(self.accept_ids), "k": self.k},
                fh,
                sort_keys=True,
            )
            fh.write("\n")


def _candidates(posting: JobPosting, matcher, encoder, stats, taxonomy):
    context = tag(matcher, posting)
    ids = sorted({m.entity_id for m in context if m.entity_type == matcher.entity_type})
    return [
        ((matcher.entity_type, eid), extract(posting, matcher.entity_type, eid, context, encoder, stats, taxonomy))
        for eid in ids
    ]


def run_simulation(
    taxonomy: Taxonomy,
    table: EmbeddingTable,
    model,
    persona: Persona,
    rounds: int,
    seed: int,
    log_path: str | Path,
) -> EventLog:
    """Serve suggestions round by round and log the persona's reactions.

    Feature snapshots use the market stats accumulated so far, exactly as a
    live deployment would: early events carry prior-only market features,
    later ones reflect the drift the persona induces.
    """
    rng = random.Random(seed)
    encoder = SentenceEncoder(table)
    matcher = build_matcher(taxonomy, persona.entity_type)
    stats = MarketStats()
    log = EventLog(log_path)
    for i in range(rounds):
        posting, _truth = generate_posting(taxonomy, rng, f"sim{i:05d}")
        cands = _candidates(posting, matcher, encoder, stats, taxonomy)
        if not cands:
            continue
        served = rank(model, cands, persona.k)
        fv_by_id = {eid: fv for (_t, eid), fv in cands}
        suggestion_id = f"simsug{i:05d}"
        events = []
        for s in served:
            snapshot = tuple(fv_by_id[s.entity_id].to_list())
            base = dict(
                suggestion_id=suggestion_id,
                posting_id=posting.posting_id,
                entity_type=persona.entity_type,
                entity_id=s.entity_id,
                industry=posting.industry,
                feature_snapshot=snapshot,
                timestamp=i,
            )
            events.append(FeedbackEvent(event_id=f"{suggestion_id}:{s.entity_id}:shown", action="shown", **base))
            action = "accepted" if s.entity_id in persona.accept_ids else "rejected"
            events.append(FeedbackEvent(event_id=f"{suggestion_id}:{s.entity_id}:{action}", action=action, **base))
        for event in events:
            log.append(event)
            apply_event(stats, event)
    return log


def held_out_postings(taxonomy: Taxonomy, n: int, seed: int) -> list[JobPosting]:
    rng = random.Random(seed)
    return [generate_posting(taxonomy, rng, f"eval{i:05d}")[0] for i in range(n)]


def mean_reciprocal_rank(
    model,
    postings: list[JobPosting],
    persona: Persona,
    taxonomy: Taxonomy,
    table: EmbeddingTable,
    stats: MarketStats,
) -> float:
    """MRR of the persona's preferred entities over full candidate rankings.

    Postings whose candidate set contains no preferred entity contribute 0.
    """
    encoder = SentenceEncoder(table)
    matcher = build_matcher(taxonomy, persona.entity_type)
    total = 0.0
    for posting in postings:
        cands = _candidates(posting, matcher, encoder, stats, taxonomy)
        if not cands:
            continue
        ranked = rank(model, cands, len(cands))
        for s in ranked:
            if s.entity_id in persona.accept_ids:
                total += 1.0 / s.rank
                break
    return total / len(postings) if postings else 0.0
