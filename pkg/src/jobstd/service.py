"""HTTP JSON API and nearline batch processor.

All hot-path state (taxonomy, matchers, models, market stats) lives in an
immutable RegistrySnapshot; activation builds a new snapshot and swaps the
reference under a lock, so an in-flight request keeps the versions it started
with. The event log and the suggestion snapshot store are written through a
single serialized writer.
"""

from __future__ import annotations

import json
import re
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

from .feedback import DuplicateEventId, EventLog, FeedbackEvent, InvalidEvent
from .features import EmbeddingTable, MarketStats, SentenceEncoder, extract
from .ranker import (
    QuestionClassifier,
    RankedSuggestion,
    load_model,
    model_from_dict,
    question_model_from_dict,
    rank,
    suggest_questions,
)
from .sampledata import posting_from_dict
from .tagger import EntityType, JobPosting, Matcher, build_matcher, build_title_token_index, tag, title_candidates
from .taxonomy import Taxonomy, load_taxonomy, lookup
from .textnorm import normalize_key


@dataclass
class ServiceConfig:
    taxonomy_path: str
    embeddings_path: str
    models_dir: str
    event_log_path: str
    snapshot_store_path: str
    taxonomy_version: int = 1
    k_titles: int = 5
    k_skills: int = 10
    k_questions: int = 3

    @classmethod
    def load(cls, path: str | Path) -> "ServiceConfig":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(**obj)


_MODEL_FILE_RE = re.compile(r"^(title|skill|company|question_type)_v(\d+)\.json$")
_CLF_FILE_RE = re.compile(r"^question_classifier_v(\d+)\.json$")
_STATS_FILE_RE = re.compile(r"^market_stats_v(\d+)\.json$")


@dataclass(frozen=True)
class RegistrySnapshot:
    taxonomy: Taxonomy
    encoder: SentenceEncoder
    models: dict[EntityType, object]
    model_versions: dict[EntityType, int]
    matchers: dict[EntityType, Matcher]
    title_token_index: dict[str, set[str]]
    stats: MarketStats
    stats_version: int
    question_classifier: QuestionClassifier | None
    question_encoder: SentenceEncoder | None


class ModelRegistry:
    """Versioned model artifacts with atomic activation.

    Model files are named `<entity_type>_v<version>.json`; the question
    classifier (kind "question") lives under the question_type entity type.
    The newest version of each type is active after load unless explicitly
    activated otherwise.
    """

    def __init__(self, config: ServiceConfig):
        self.config = config
        self._lock = threading.Lock()
        self._taxonomy = load_taxonomy(config.taxonomy_path, version=config.taxonomy_version)
        self._table = EmbeddingTable.load(config.embeddings_path)
        self._artifacts: dict[EntityType, dict[int, Path]] = {t: {} for t in EntityType}
        self._clf_artifacts: dict[int, Path] = {}
        self._stats_artifacts: dict[int, Path] = {}
        self._active: dict[EntityType, int] = {}
        self._active_clf: int = 0
        self._active_stats: int = 0
        self._scan_models_dir()
        self._snapshot = self._build_snapshot()

    def _scan_models_dir(self) -> None:
        models_dir = Path(self.config.models_dir)
        if not models_dir.exists():
            return
        for path in sorted(models_dir.iterdir()):
            m = _MODEL_FILE_RE.match(path.name)
            if m:
                etype = EntityType(m.group(1))
                self._artifacts[etype][int(m.group(2))] = path
                continue
            m = _CLF_FILE_RE.match(path.name)
            if m:
                self._clf_artifacts[int(m.group(1))] = path
                continue
            m = _STATS_FILE_RE.match(path.name)
            if m:
                self._stats_artifacts[int(m.group(1))] = path
        for etype, versions in self._artifacts.items():
            if versions:
                self._active[etype] = max(versions)
        if self._clf_artifacts:
            self._active_clf = max(self._clf_artifacts)
        if self._stats_artifacts:
            self._active_stats = max(self._stats_artifacts)

    def _build_snapshot(self) -> RegistrySnapshot:
        models: dict[EntityType, object] = {}
        versions: dict[EntityType, int] = {}
        question_clf = None
        question_enc = None
        for etype, version in self._active.items():
            path = self._artifacts[etype][version]
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
            models[etype] = model_from_dict(obj)
            versions[etype] = version
        if self._active_clf:
            with open(self._clf_artifacts[self._active_clf], encoding="utf-8") as fh:
                question_clf, question_enc = question_model_from_dict(json.load(fh), self._table)
        if self._active_stats:
            with open(self._stats_artifacts[self._active_stats], encoding="utf-8") as fh:
                stats = MarketStats.from_dict(json.load(fh))
        else:
            stats = MarketStats()
        matchers = {}
        for etype in (EntityType.SKILL, EntityType.COMPANY):
            if self._taxonomy.of_type(etype):
                matchers[etype] = build_matcher(self._taxonomy, etype)
        return RegistrySnapshot(
            taxonomy=self._taxonomy,
            encoder=SentenceEncoder(self._table),
            models=models,
            model_versions=versions,
            matchers=matchers,
            title_token_index=build_title_token_index(self._taxonomy),
            stats=stats,
            stats_version=self._active_stats,
            question_classifier=question_clf,
            question_encoder=question_enc,
        )

    def snapshot(self) -> RegistrySnapshot:
        with self._lock:
            return self._snapshot

    def register(self, entity_type: EntityType, version: int, path: str | Path) -> None:
        with self._lock:
            self._artifacts[entity_type][version] = Path(path)

    def available_versions(self, entity_type: EntityType) -> list[int]:
        with self._lock:
            return sorted(self._artifacts[entity_type])

    def activate(self, entity_type: EntityType, version: int) -> None:
        with self._lock:
            if version not in self._artifacts[entity_type]:
                raise KeyError(f"no {entity_type.value} model version {version}")
            self._active[entity_type] = version
            self._snapshot = self._build_snapshot()

    def activate_stats(self, version: int) -> None:
        with self._lock:
            if version not in self._stats_artifacts:
                raise KeyError(f"no market stats version {version}")
            self._active_stats = version
            self._snapshot = self._build_snapshot()


class SnapshotStore:
    """Feature snapshots of served suggestions, keyed by suggestion_id.

    JSON Lines on disk so feedback can be joined to served features after a
    restart; a dict in memory for lookup.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._data: dict[str, dict] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        obj = json.loads(line)
                        self._data[obj["suggestion_id"]] = obj
    def put(self, suggestion_id: str, posting_id: str, industry: str,
            features: dict[tuple[str, str], list[float]]) -> None:
        obj = {
            "suggestion_id": suggestion_id,
            "posting_id": posting_id,
            "industry": industry,
            "features": {f"{t}::{e}": v for (t, e), v in features.items()},
        }
        with self._lock:
            self._data[suggestion_id] = obj
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(obj, sort_keys=True) + "\n")

    def get(self, suggestion_id: str) -> dict | None:
        with self._lock:
            return self._data.get(suggestion_id)


def _suggestion_dict(s: RankedSuggestion, taxonomy: Taxonomy) -> dict:
    entity = lookup(taxonomy, s.entity_type, s.entity_id)
    return {
        "entity_type": s.entity_type.value,
        "entity_id": s.entity_id,
        "name": entity.canonical_name if entity else s.entity_id,
        "score": s.score,
        "rank": s.rank,
    }


def standardize_posting(posting: JobPosting, snap: RegistrySnapshot, k_titles: int, k_skills: int, k_questions: int):
    """Run tag -> extract -> rank for every entity type with active models.

    Returns (sections dict, feature snapshots of every served suggestion).
    """
    taxonomy = snap.taxonomy
    encoder = snap.encoder
    stats = snap.stats
    context = []
    for etype in (EntityType.SKILL, EntityType.COMPANY):
        matcher = snap.matchers.get(etype)
        if matcher is not None:
            context.extend(tag(matcher, posting))

    served_features: dict[tuple[str, str], list[float]] = {}
    sections: dict[str, list[dict]] = {"titles": [], "skills": [], "company": [], "questions": []}

    def run_rank(etype: EntityType, candidate_ids, k, surface=None):
        model = snap.models.get(etype)
        if model is None or not candidate_ids:
            return []
        cands = []
        for eid in sorted(candidate_ids):
            fv = extract(posting, etype, eid, context, encoder, stats, taxonomy, surface=surface)
            cands.append(((etype, eid), fv))
        ranked = rank(model, cands, k)
        fv_by_id = {eid: fv for (_, eid), fv in cands}
        for s in ranked:
            served_features[(etype.value, s.entity_id)] = fv_by_id[s.entity_id].to_list()
        return ranked

    title_ids = title_candidates(posting.raw_title, taxonomy, snap.title_token_index)
    sections["titles"] = [
        _suggestion_dict(s, taxonomy)
        for s in run_rank(EntityType.TITLE, title_ids, k_titles, surface=posting.raw_title)
    ]

    skill_ids = {m.entity_id for m in context if m.entity_type == EntityType.SKILL}
    sections["skills"] = [
        _suggestion_dict(s, taxonomy) for s in run_rank(EntityType.SKILL, skill_ids, k_skills)
    ]

    company_ids = {m.entity_id for m in context if m.entity_type == EntityType.COMPANY}
    sections["company"] = [
        _suggestion_dict(s, taxonomy) for s in run_rank(EntityType.COMPANY, company_ids, 1)
    ]

    q_model = snap.models.get(EntityType.QUESTION_TYPE)
    if q_model is not None and snap.question_classifier is not None and snap.question_encoder is not None:
        q_ranked = suggest_questions(
            posting,
            snap.question_classifier,
            snap.question_encoder,
            q_model,
            stats,
            taxonomy,
            k=k_questions,
        )
        for s in q_ranked:
            fv = extract(posting, EntityType.QUESTION_TYPE, s.entity_id, [], encoder, stats, taxonomy)
            served_features[(EntityType.QUESTION_TYPE.value, s.entity_id)] = fv.to_list()
        sections["questions"] = [_suggestion_dict(s, taxonomy) for s in q_ranked]

    return sections, served_features


def typeahead_titles(taxonomy: Taxonomy, prefix: str, limit: int = 10) -> list[dict]:
    """Titles with any alias token starting with the normalized prefix,
    ordered by canonical name length then name."""
    key = normalize_key(prefix)
    if not key:
        return []
    out = []
    for e in taxonomy.of_type(EntityType.TITLE):
        hit = False
        for alias in e.normalized_aliases():
            if any(tok.startswith(key) for tok in alias.split(" ")):
                hit = True
                break
        if hit:
            out.append(e)
    out.sort(key=lambda e: (len(e.canonical_name), e.canonical_name))
    return [{"id": e.id, "name": e.canonical_name} for e in out[:limit]]


class StandardizeService:
    """Framework-independent core shared by the HTTP app, the stream worker,
    and the feedback simulation harness."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.registry = ModelRegistry(config)
        self.event_log = EventLog(config.event_log_path)
        self.snapshot_store = SnapshotStore(config.snapshot_store_path)
        self._feedback_seen: set[tuple[str, str, str, str]] = set()
        self._log_lock = threading.Lock()

    def standardize(self, posting: JobPosting, log_shown: bool = True) -> dict:
        snap = self.registry.snapshot()
        sections, served = standardize_posting(
            posting, snap, self.config.k_titles, self.config.k_skills, self.config.k_questions
        )
        suggestion_id = uuid.uuid4().hex
        self.snapshot_store.put(suggestion_id, posting.posting_id, posting.industry, served)
        if log_shown:
            now = int(time.time() * 1000)
            with self._log_lock:
                for (type_str, eid), snapshot in sorted(served.items()):
                    event = FeedbackEvent(
                        event_id=f"{suggestion_id}:{type_str}:{eid}:shown",
                        suggestion_id=suggestion_id,
                        posting_id=posting.posting_id,
                        entity_type=EntityType(type_str),
                        entity_id=eid,
                        action="shown",
                        industry=posting.industry,
                        feature_snapshot=tuple(snapshot),
                        timestamp=now,
                    )
                    try:
                        self.event_log.append(event)
                    except DuplicateEventId:
                        pass
        return {
            "suggestion_id": suggestion_id,
            **sections,
            "model_versions": {t.value: v for t, v in snap.model_versions.items()},
            "taxonomy_version": snap.taxonomy.version,
        }

    def record_feedback(self, suggestion_id: str, entity_type: EntityType, entity_id: str,
                        action: str, replacement_entity_id: str | None = None) -> None:
        """Append one feedback event with the stored served snapshot.

        Raises KeyError for unknown suggestion ids, InvalidEvent for bad
        action combinations. Idempotent per (suggestion, type, entity, action).
        """
        stored = self.snapshot_store.get(suggestion_id)
        if stored is None:
            raise KeyError(f"unknown suggestion_id {suggestion_id!r}")
        feature_key = f"{entity_type.value}::{entity_id}"
        snapshot = stored["features"].get(feature_key)
        if snapshot is None:
            raise KeyError(f"suggestion {suggestion_id!r} did not serve {feature_key}")
        dedupe = (suggestion_id, entity_type.value, entity_id, action)
        with self._log_lock:
            if dedupe in self._feedback_seen:
                return
            event = FeedbackEvent(
                event_id=f"{suggestion_id}:{entity_type.value}:{entity_id}:{action}",
                suggestion_id=suggestion_id,
                posting_id=stored["posting_id"],
                entity_type=entity_type,
                entity_id=entity_id,
                action=action,
                industry=stored.get("industry", ""),
                feature_snapshot=tuple(snapshot),
                replacement_entity_id=replacement_entity_id,
                timestamp=int(time.time() * 1000),
            )
            try:
                self.event_log.append(event)
            except DuplicateEventId:
                pass
            self._feedback_seen.add(dedupe)


def stream_process(input_path: str | Path, output_path: str | Path, service: StandardizeService) -> dict:
    """Standardize a JSON Lines posting file line by line.

    Failures are isolated per line; output order matches input order.
    """
    count = 0
    failures = 0
    with open(input_path, encoding="utf-8") as fin, open(output_path, "w", encoding="utf-8") as fout:
        for line in fin:
            line = line.strip()
            if not line:
                continue
            try:
                posting = posting_from_dict(json.loads(line))
                result = service.standardize(posting, log_shown=False)
                fout.write(
                    json.dumps(
                        {
                            "posting_id": posting.posting_id,
                            "titles": result["titles"],
                            "skills": result["skills"],
                            "company": result["company"],
                            "questions": result["questions"],
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
                count += 1
            except Exception:
                failures += 1
    return {"count": count, "failures": failures}


from pydantic import BaseModel


class PostingBody(BaseModel):
    posting_id: str
    raw_title: str
    description: str = ""
    location: str = ""
    company_field: str = ""
    contact_email: str = ""
    industry: str = ""


class FeedbackBody(BaseModel):
    suggestion_id: str
    entity_type: str
    entity_id: str
    action: str
    replacement_entity_id: str | None = None


class ActivateBody(BaseModel):
    entity_type: str
    version: int


def create_app(service: StandardizeService):
    """FastAPI app over the core service."""
    from fastapi import FastAPI, HTTPException, Query
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import Response

    app = FastAPI(title="jobstd")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.post("/v1/standardize")
    def standardize(body: PostingBody):
        try:
            posting = JobPosting(**body.model_dump())
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        snap = service.registry.snapshot()
        if not snap.models:
            raise HTTPException(status_code=503, detail="no active models")
        return service.standardize(posting)

    @app.get("/v1/titles/typeahead")
    def typeahead(q: str = Query(default="")):
        if not normalize_key(q):
            raise HTTPException(status_code=400, detail="empty query")
        snap = service.registry.snapshot()
        return typeahead_titles(snap.taxonomy, q)

    @app.post("/v1/feedback", status_code=204)
    def feedback(body: FeedbackBody):
        try:
            etype = EntityType(body.entity_type)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"unknown entity type {body.entity_type!r}")
        if body.action not in ("accepted", "rejected", "overridden"):
            raise HTTPException(status_code=400, detail=f"invalid action {body.action!r}")
        try:
            service.record_feedback(
                body.suggestion_id, etype, body.entity_id, body.action, body.replacement_entity_id
            )
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except InvalidEvent as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return Response(status_code=204)

    @app.post("/v1/admin/models/activate", status_code=204)
    def activate(body: ActivateBody):
        try:
            etype = EntityType(body.entity_type)
            service.registry.activate(etype, body.version)
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return Response(status_code=204)

    return app
