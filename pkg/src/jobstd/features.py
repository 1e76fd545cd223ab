"""Content and market features for (posting, candidate entity) pairs.

The feature schema is fixed and versioned: feedback events freeze feature
snapshots at serving time, so any drift in the schema must be detectable.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

import numpy as np

from .tagger import EntityMention, JobPosting, PostingField, question_sentence_candidates
from .taxonomy import EntityType, Taxonomy, TaxonomyEntity, lookup
from .textnorm import normalize_key, tokenize

SCHEMA_VERSION = 1

FEATURE_NAMES = (
    "ngram_sim",
    "edit_sim",
    "exact_match",
    "mention_count",
    "first_pos_frac",
    "in_title",
    "email_domain_match",
    "location_match",
    "sem_posting_cos",
    "sem_context_cos",
    "coherence_cos",
    "pmi_industry",
    "acceptance_rate_smoothed",
    "log_shown",
)

NUM_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureVector:
    ngram_sim: float = 0.0
    edit_sim: float = 0.0
    exact_match: float = 0.0
    mention_count: float = 0.0
    first_pos_frac: float = 0.0
    in_title: float = 0.0
    email_domain_match: float = 0.0
    location_match: float = 0.0
    sem_posting_cos: float = 0.0
    sem_context_cos: float = 0.0
    coherence_cos: float = 0.0
    pmi_industry: float = 0.0
    acceptance_rate_smoothed: float = 0.5
    log_shown: float = 0.0

    def __post_init__(self):
        for f in dc_fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ValueError(f"non-finite feature {f.name}={v}")

    def to_list(self) -> list[float]:
        return [float(getattr(self, name)) for name in FEATURE_NAMES]

    def to_array(self) -> np.ndarray:
        return np.array(self.to_list(), dtype=np.float64)

    @classmethod
    def from_list(cls, values) -> "FeatureVector":
        values = list(values)
        if len(values) != NUM_FEATURES:
            raise ValueError(f"expected {NUM_FEATURES} features, got {len(values)}")
        return cls(**{name: float(v) for name, v in zip(FEATURE_NAMES, values)})


class EmbeddingError(Exception):
    pass


ENTITY_KEY_PREFIX = "ENT::"


def entity_vector_key(entity_type: EntityType, entity_id: str) -> str:
    return f"{ENTITY_KEY_PREFIX}{entity_type.value}::{entity_id}"


class EmbeddingTable:
    """Word and entity vectors from a text file ("count d" header, one
    space-separated vector per line; entity keys are "ENT::<type>::<id>")."""

    def __init__(self, dimension: int):
        if dimension <= 0:
            raise EmbeddingError("dimension must be positive")
        self.dimension = dimension
        self._words: dict[str, np.ndarray] = {}
        self._entities: dict[tuple[EntityType, str], np.ndarray] = {}

    def add_word(self, token: str, vector) -> None:
        self._words[token] = self._check(vector)

    def add_entity(self, entity_type: EntityType, entity_id: str, vector) -> None:
        self._entities[(entity_type, entity_id)] = self._check(vector)

    def _check(self, vector) -> np.ndarray:
        v = np.asarray(vector, dtype=np.float64)
        if v.shape != (self.dimension,):
            raise EmbeddingError(f"vector length {v.shape} != dimension {self.dimension}")
        return v

    def word(self, token: str) -> np.ndarray | None:
        return self._words.get(token)

    def entity(self, entity_type: EntityType, entity_id: str) -> np.ndarray | None:
        return self._entities.get((entity_type, entity_id))

    def __len__(self) -> int:
        return len(self._words) + len(self._entities)

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise EmbeddingError("first line must be 'count d'")
            count, dim = int(header[0]), int(header[1])
            table = cls(dim)
            for line in fh:
                parts = line.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    raise EmbeddingError(f"bad vector line for {parts[0]!r}")
                key = parts[0]
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
                if key.startswith(ENTITY_KEY_PREFIX):
                    _, type_str, eid = key.split("::", 2)
                    table.add_entity(EntityType(type_str), eid, vec)
                else:
                    table.add_word(key, vec)
        if len(table) != count:
            raise EmbeddingError(f"header count {count} != {len(table)} vectors")
        return table

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self)} {self.dimension}\n")
            for token in sorted(self._words):
                fh.write(token + " " + " ".join(repr(float(x)) for x in self._words[token]) + "\n")
            for (etype, eid) in sorted(self._entities, key=lambda k: (k[0].value, k[1])):
                vec = self._entities[(etype, eid)]
                fh.write(entity_vector_key(etype, eid) + " " + " ".join(repr(float(x)) for x in vec) + "\n")


class SentenceEncoder:
    """Averaged word vectors with an optional trainable tanh projection.

    encode() output is always unit-norm, except all-OOV input which maps to
    the zero vector (flagged via is_zero()).
    """

    def __init__(self, table: EmbeddingTable, projection: np.ndarray | None = None, bias: np.ndarray | None = None):
        self.table = table
        d = table.dimension
        self.projection = np.asarray(projection, dtype=np.float64) if projection is not None else None
        self.bias = np.asarray(bias, dtype=np.float64) if bias is not None else None
        if self.projection is not None and self.projection.shape != (d, d):
            raise EmbeddingError("projection must be d x d")
        if self.bias is not None and self.bias.shape != (d,):
            raise EmbeddingError("bias must be length d")
        self._cache: dict[str, np.ndarray] = {}

    @property
    def trained(self) -> bool:
        return self.projection is not None

    def mean_vector(self, text: str) -> np.ndarray:
        """Plain average of in-vocabulary token vectors; zero if all OOV."""
        vecs = [v for v in (self.table.word(t) for t in tokenize(text)) if v is not None]
        if not vecs:
            return np.zeros(self.table.dimension)
        return np.mean(vecs, axis=0)

    def encode(self, text: str) -> np.ndarray:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        v = self.mean_vector(text)
        if self.trained:
            v = np.tanh(self.projection @ v + self.bias)
        norm = float(np.linalg.norm(v))
        out = v / norm if norm > 0 else np.zeros(self.table.dimension)
        out.setflags(write=False)
        if len(self._cache) < 65536:
            self._cache[text] = out
        return out

    @staticmethod
    def is_zero(vector: np.ndarray) -> bool:
        return not np.any(vector)


class UndefinedStats(Exception):
    pass


class MarketStats:
    """Co-occurrence and acceptance counters aggregated from the feedback log.

    Immutable by convention once published: the feedback aggregator builds a
    fresh snapshot and consumers swap references.
    """

    def __init__(self):
        self.pair_counts: Counter[tuple[str, tuple[str, str]]] = Counter()
        self.industry_counts: Counter[str] = Counter()
        self.entity_counts: Counter[tuple[str, str]] = Counter()
        self.total = 0
        # (entity_type value, entity_id, industry) -> [shown, accepted]
        self.acceptance: dict[tuple[str, str, str], list[int]] = {}

    @property
    def vocabulary_size(self) -> int:
        return len(self.pair_counts)

    def record_shown(self, entity_type: EntityType, entity_id: str, industry: str) -> None:
        key = (entity_type.value, entity_id, industry)
        self.acceptance.setdefault(key, [0, 0])[0] += 1

    def record_accepted(self, entity_type: EntityType, entity_id: str, industry: str) -> None:
        key = (entity_type.value, entity_id, industry)
        self.acceptance.setdefault(key, [0, 0])[1] += 1
        ent = (entity_type.value, entity_id)
        self.pair_counts[(industry, ent)] += 1
        self.industry_counts[industry] += 1
        self.entity_counts[ent] += 1
        self.total += 1

    def counters(self, entity_type: EntityType, entity_id: str, industry: str) -> tuple[int, int]:
        shown, accepted = self.acceptance.get((entity_type.value, entity_id, industry), (0, 0))
        return shown, accepted

    def check(self) -> None:
        for (industry, ent), c_xy in self.pair_counts.items():
            assert c_xy <= min(self.industry_counts[industry], self.entity_counts[ent]) <= self.total
        for shown, accepted in self.acceptance.values():
            assert 0 <= accepted <= shown

    def to_dict(self) -> dict:
        return {
            "pairs": [[ind, list(ent), c] for (ind, ent), c in sorted(self.pair_counts.items())],
            "acceptance": [
                [list(key), shown, accepted]
                for key, (shown, accepted) in sorted(self.acceptance.items())
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MarketStats":
        stats = cls()
        for ind, ent, c in obj.get("pairs", []):
            ent = (ent[0], ent[1])
            stats.pair_counts[(ind, ent)] = c
            stats.industry_counts[ind] += c
            stats.entity_counts[ent] += c
            stats.total += c
        for key, shown, accepted in obj.get("acceptance", []):
            stats.acceptance[(key[0], key[1], key[2])] = [shown, accepted]
        return stats


def char_trigrams(text: str) -> Counter[str]:
    key = normalize_key(text)
    return Counter(key[i : i + 3] for i in range(len(key) - 2))


def ngram_similarity(a: str, b: str) -> float:
    """Jaccard similarity of character-trigram multisets after normalization."""
    ta, tb = char_trigrams(a), char_trigrams(b)
    if not ta and not tb:
        return 1.0
    inter = sum((ta & tb).values())
    union = sum((ta | tb).values())
    return inter / union if union else 0.0


def edit_similarity(a: str, b: str) -> float:
    """1 - Levenshtein(a, b) / max(len) over normalized key strings."""
    a, b = normalize_key(a), normalize_key(b)
    if a == b:
        return 1.0
    if not a or not b:
        return 0.0
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return 1.0 - prev[-1] / max(len(a), len(b))


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


PMI_ALPHA = 0.5


def pmi(stats: MarketStats, industry: str, entity: tuple[EntityType, str], alpha: float = PMI_ALPHA) -> float:
    """Smoothed pointwise mutual information of an (industry, entity) pair.

    log(((c_xy+a)(N+aV)) / ((c_x+a*sqrt(V))(c_y+a*sqrt(V)))) with V the
    number of distinct observed pairs. With a=0 and independent counts the
    value is exactly 0.
    """
    if stats.total == 0:
        raise UndefinedStats("no co-occurrence observations")
    ent = (entity[0].value, entity[1])
    c_xy = stats.pair_counts.get((industry, ent), 0)
    c_x = stats.industry_counts.get(industry, 0)
    c_y = stats.entity_counts.get(ent, 0)
    n = stats.total
    v = stats.vocabulary_size
    sqrt_v = math.sqrt(v)
    num = (c_xy + alpha) * (n + alpha * v)
    den = (c_x + alpha * sqrt_v) * (c_y + alpha * sqrt_v)
    if num <= 0 or den <= 0:
        raise UndefinedStats("unsmoothed PMI undefined for zero counts")
    return math.log(num / den)


def acceptance_rate(stats: MarketStats, entity: tuple[EntityType, str], industry: str) -> float:
    """Laplace-smoothed acceptance rate; 0.5 prior with no history."""
    shown, accepted = stats.counters(entity[0], entity[1], industry)
    return (accepted + 1) / (shown + 2)


def _email_domain_tokens(email: str) -> set[str]:
    if "@" not in email:
        return set()
    domain = email.rsplit("@", 1)[1]
    parts = [p for p in domain.lower().split(".") if p]
    # drop the TLD; "jobs@acme.com" should match on "acme", not "com"
    if len(parts) > 1:
        parts = parts[:-1]
    return set(parts)


def _entity_alias_tokens(entity: TaxonomyEntity) -> set[str]:
    out: set[str] = set()
    for alias in entity.normalized_aliases():
        out.update(alias.split(" "))
    return out


def extract(
    posting: JobPosting,
    entity_type: EntityType,
    entity_id: str,
    context: list[EntityMention],
    encoder: SentenceEncoder,
    stats: MarketStats,
    taxonomy: Taxonomy,
    surface: str | None = None,
) -> FeatureVector:
    """Fill the full 14-feature schema for one (posting, candidate) pair.

    `context` is all tagged mentions of the posting (any type). `surface`
    defaults to the candidate's first mention surface, or the raw title for
    generated candidates without a mention (title candidates). Every missing
    signal falls back to a fixed default; the vector never contains NaN.
    """
    entity = lookup(taxonomy, entity_type, entity_id)
    if entity is None:
        raise KeyError(f"unknown entity {entity_type.value}:{entity_id}")

    own = [m for m in context if m.entity_type == entity_type and m.entity_id == entity_id]
    if surface is None:
        surface = own[0].surface if own else posting.raw_title

    canonical = entity.canonical_name
    f_ngram = ngram_similarity(surface, canonical)
    f_edit = edit_similarity(surface, canonical)
    f_exact = 1.0 if normalize_key(surface) == normalize_key(canonical) else 0.0

    f_count = float(len(own))
    desc_mentions = [m for m in own if m.field == PostingField.DESCRIPTION]
    if desc_mentions and posting.description:
        f_first = desc_mentions[0].char_span[0] / len(posting.description)
    else:
        f_first = 0.0
    # generated title candidates carry no mention but come from the raw title
    f_in_title = 1.0 if (
        any(m.field == PostingField.TITLE for m in own)
        or (not own and entity_type == EntityType.TITLE)
    ) else 0.0

    f_email = 0.0
    if entity_type == EntityType.COMPANY and posting.contact_email:
        domain_tokens = _email_domain_tokens(posting.contact_email)
        if domain_tokens & _entity_alias_tokens(entity):
            f_email = 1.0

    f_location = 0.0
    if posting.location:
        loc_tokens = set(tokenize(posting.location))
        attr_tokens: set[str] = set()
        for value in entity.attributes.values():
            attr_tokens.update(tokenize(value))
        if loc_tokens & attr_tokens:
            f_location = 1.0

    evec = encoder.table.entity(entity_type, entity_id)
    if evec is None:
        evec = encoder.encode(canonical)  # fallback for tail entities
    f_sem_posting = cosine(encoder.encode(posting.description), evec) if posting.description else 0.0
    context_text = _context_text(posting, desc_mentions)
    f_sem_context = cosine(encoder.encode(context_text), evec) if context_text else 0.0

    others = {m.entity_id for m in context if m.entity_type == entity_type and m.entity_id != entity_id}
    f_coherence = coherence(entity_type, entity_id, others, encoder, taxonomy)

    if stats.total > 0 and posting.industry:
        f_pmi = pmi(stats, posting.industry, (entity_type, entity_id))
    else:
        f_pmi = 0.0
    shown, _ = stats.counters(entity_type, entity_id, posting.industry)
    f_accept = acceptance_rate(stats, (entity_type, entity_id), posting.industry)
    f_log_shown = math.log1p(shown)

    return FeatureVector(
        ngram_sim=f_ngram,
        edit_sim=f_edit,
        exact_match=f_exact,
        mention_count=f_count,
        first_pos_frac=f_first,
        in_title=f_in_title,
        email_domain_match=f_email,
        location_match=f_location,
        sem_posting_cos=f_sem_posting,
        sem_context_cos=f_sem_context,
        coherence_cos=f_coherence,
        pmi_industry=f_pmi,
        acceptance_rate_smoothed=f_accept,
        log_shown=f_log_shown,
    )


def _context_text(posting: JobPosting, desc_mentions: list[EntityMention]) -> str:
    """Sentence of the description containing the first mention, else the raw title."""
    if not desc_mentions:
        return posting.raw_title
    first = desc_mentions[0].char_span[0]
    for sentence, (lo, hi) in question_sentence_candidates(posting):
        if lo <= first < hi:
            return sentence
    return posting.description


def coherence(
    entity_type: EntityType,
    entity_id: str,
    others: set[str],
    encoder: SentenceEncoder,
    taxonomy: Taxonomy,
) -> float:
    """Cosine between the candidate vector and the centroid of co-candidates."""
    cand = _entity_vec(entity_type, entity_id, encoder, taxonomy)
    if cand is None or not others:
        return 0.0
    other_vecs = []
    for oid in sorted(others):
        v = _entity_vec(entity_type, oid, encoder, taxonomy)
        if v is not None:
            other_vecs.append(v)
    if not other_vecs:
        return 0.0
    centroid = np.mean(other_vecs, axis=0)
    return cosine(cand, centroid)


def _entity_vec(entity_type, entity_id, encoder: SentenceEncoder, taxonomy: Taxonomy) -> np.ndarray | None:
    v = encoder.table.entity(entity_type, entity_id)
    if v is not None:
        return v
    entity = lookup(taxonomy, entity_type, entity_id)
    if entity is None:
        return None
    enc = encoder.encode(entity.canonical_name)
    return None if SentenceEncoder.is_zero(enc) else enc
