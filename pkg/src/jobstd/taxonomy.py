"""Professional entity taxonomy: loading, validation, and alias indexing.

The taxonomy file is UTF-8 JSON Lines, one entity per line:

    {"type": "title", "id": "t1", "name": "Software Engineer",
     "aliases": ["software developer"], "attributes": {"industry": "tech"}}

Entities are immutable after load; a reload produces a fresh Taxonomy value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .textnorm import normalize_key


class EntityType(str, Enum):
    TITLE = "title"
    SKILL = "skill"
    COMPANY = "company"
    QUESTION_TYPE = "question_type"


class TaxonomyError(Exception):
    """Base class for taxonomy load/validation failures."""


class MalformedRecord(TaxonomyError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateId(TaxonomyError):
    def __init__(self, entity_type: EntityType, entity_id: str):
        super().__init__(f"duplicate id {entity_type.value}:{entity_id}")
        self.entity_type = entity_type
        self.entity_id = entity_id


class EmptyAlias(TaxonomyError):
    def __init__(self, entity_type: EntityType, entity_id: str):
        super().__init__(f"empty alias on {entity_type.value}:{entity_id}")
        self.entity_type = entity_type
        self.entity_id = entity_id


@dataclass(frozen=True)
class TaxonomyEntity:
    id: str
    entity_type: EntityType
    canonical_name: str
    aliases: frozenset[str]
    attributes: dict[str, str] = field(default_factory=dict)

    def normalized_aliases(self) -> set[str]:
        return {normalize_key(a) for a in self.aliases}


@dataclass(frozen=True)
class Taxonomy:
    version: int
    entities: tuple[TaxonomyEntity, ...]

    def __post_init__(self):
        seen: set[tuple[EntityType, str]] = set()
        for e in self.entities:
            key = (e.entity_type, e.id)
            if key in seen:
                raise DuplicateId(e.entity_type, e.id)
            seen.add(key)
        object.__setattr__(
            self,
            "_by_key",
            {(e.entity_type, e.id): e for e in self.entities},
        )

    def counts(self) -> dict[EntityType, int]:
        out = {t: 0 for t in EntityType}
        for e in self.entities:
            out[e.entity_type] += 1
        return out

    def of_type(self, entity_type: EntityType) -> list[TaxonomyEntity]:
        return [e for e in self.entities if e.entity_type == entity_type]


def lookup(taxonomy: Taxonomy, entity_type: EntityType, entity_id: str) -> Optional[TaxonomyEntity]:
    return taxonomy._by_key.get((entity_type, entity_id))


def _parse_record(line_no: int, obj: dict) -> TaxonomyEntity:
    known = {"type", "id", "name", "aliases", "attributes"}
    for f in ("type", "id", "name"):
        if f not in obj:
            raise MalformedRecord(line_no, f"missing field '{f}'")
    unknown = set(obj) - known
    if unknown:
        import warnings

        warnings.warn(f"line {line_no}: ignoring unknown fields {sorted(unknown)}")
    try:
        etype = EntityType(obj["type"])
    except ValueError:
        raise MalformedRecord(line_no, f"unknown entity type {obj['type']!r}")
    eid = obj["id"]
    name = obj["name"]
    if not isinstance(eid, str) or not eid:
        raise MalformedRecord(line_no, "id must be a non-empty string")
    if not isinstance(name, str) or not name.strip():
        raise MalformedRecord(line_no, "name must be non-empty")
    raw_aliases = obj.get("aliases", [])
    if not isinstance(raw_aliases, list) or any(not isinstance(a, str) for a in raw_aliases):
        raise MalformedRecord(line_no, "aliases must be a list of strings")
    aliases = set(raw_aliases)
    aliases.add(name)
    for a in aliases:
        if not normalize_key(a):
            raise EmptyAlias(etype, eid)
    attrs = obj.get("attributes", {})
    if not isinstance(attrs, dict):
        raise MalformedRecord(line_no, "attributes must be an object")
    return TaxonomyEntity(
        id=eid,
        entity_type=etype,
        canonical_name=name,
        aliases=frozenset(aliases),
        attributes={str(k): str(v) for k, v in attrs.items()},
    )


def load_taxonomy(path: str | Path, version: int = 1) -> Taxonomy:
    """Load and validate a JSON Lines taxonomy file.

    Raises MalformedRecord, DuplicateId, or EmptyAlias on the first bad record.
    """
    entities: list[TaxonomyEntity] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise MalformedRecord(line_no, "record must be a JSON object")
            entities.append(_parse_record(line_no, obj))
    return Taxonomy(version=version, entities=tuple(entities))


def serialize(taxonomy: Taxonomy) -> str:
    """Write the taxonomy back out as JSON Lines (stable field and line order)."""
    lines = []
    for e in taxonomy.entities:
        lines.append(
            json.dumps(
                {
                    "type": e.entity_type.value,
                    "id": e.id,
                    "name": e.canonical_name,
                    "aliases": sorted(e.aliases),
                    "attributes": dict(sorted(e.attributes.items())),
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def alias_index(taxonomy: Taxonomy, entity_type: EntityType) -> dict[str, set[str]]:
    """Map each normalized alias of the given type to the ids that carry it."""
    index: dict[str, set[str]] = {}
    for e in taxonomy.of_type(entity_type):
        for alias in e.normalized_aliases():
            index.setdefault(alias, set()).add(e.id)
    return index


def iter_type_ids(taxonomy: Taxonomy, entity_type: EntityType) -> Iterable[str]:
    for e in taxonomy.of_type(entity_type):
        yield e.id
