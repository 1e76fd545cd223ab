"""Phase-1 candidate generation: dictionary entity tagging over job postings.

The matcher is a token-level Aho-Corasick automaton compiled from all
normalized aliases of one entity type. Matching is token-aligned: an alias
token sequence must match whole posting tokens, so "java" never fires inside
"javascript". All overlapping matches are reported; selection is the ranker's
job, not the tagger's.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .taxonomy import EntityType, Taxonomy, alias_index
from .textnorm import NormalizedText, normalize

__all__ = [
    "JobPosting",
    "PostingField",
    "EntityMention",
    "Matcher",
    "EmptyAliasSet",
    "build_matcher",
    "tag",
    "naive_tag",
    "title_candidates",
    "build_title_token_index",
    "question_sentence_candidates",
    "normalize",
    "NormalizedText",
]


@dataclass(frozen=True)
class JobPosting:
    posting_id: str
    raw_title: str
    description: str = ""
    location: str = ""
    company_field: str = ""
    contact_email: str = ""
    industry: str = ""

    def __post_init__(self):
        if not self.posting_id:
            raise ValueError("posting_id must be non-empty")
        if not self.raw_title:
            raise ValueError("raw_title must be non-empty")


class PostingField(str, Enum):
    TITLE = "title"
    DESCRIPTION = "description"
    COMPANY = "company"


# Field scan order for mention output ordering.
_FIELD_ORDER = {PostingField.TITLE: 0, PostingField.DESCRIPTION: 1, PostingField.COMPANY: 2}


@dataclass(frozen=True)
class EntityMention:
    entity_type: EntityType
    entity_id: str
    surface: str
    field: PostingField
    token_span: tuple[int, int]  # end-exclusive token indices within the field
    char_span: tuple[int, int]  # end-exclusive char offsets within the field text

    def sort_key(self):
        return (_FIELD_ORDER[self.field], self.token_span[0], self.entity_id, self.token_span[1])


class EmptyAliasSet(Exception):
    pass


class _AcNode:
    __slots__ = ("children", "fail", "outputs")

    def __init__(self):
        self.children: dict[str, _AcNode] = {}
        self.fail: _AcNode | None = None
        # (pattern token length, frozenset of entity ids)
        self.outputs: list[tuple[int, frozenset[str]]] = []


@dataclass
class Matcher:
    entity_type: EntityType
    taxonomy_version: int
    pattern_count: int
    _root: _AcNode = field(repr=False, default_factory=_AcNode)

    def find(self, tokens: tuple[str, ...]) -> list[tuple[int, int, frozenset[str]]]:
        """All (start, end, entity_ids) token-aligned alias occurrences."""
        hits: list[tuple[int, int, frozenset[str]]] = []
        node = self._root
        for i, tok in enumerate(tokens):
            while node is not self._root and tok not in node.children:
                node = node.fail
            node = node.children.get(tok, self._root)
            for length, ids in node.outputs:
                hits.append((i + 1 - length, i + 1, ids))
        return hits


def build_matcher(taxonomy: Taxonomy, entity_type: EntityType) -> Matcher:
    index = alias_index(taxonomy, entity_type)
    if not index:
        raise EmptyAliasSet(f"no {entity_type.value} entities in taxonomy")
    root = _AcNode()
    for alias, ids in index.items():
        tokens = alias.split(" ")
        node = root
        for tok in tokens:
            node = node.children.setdefault(tok, _AcNode())
        node.outputs.append((len(tokens), frozenset(ids)))
    # BFS failure links; merge suffix outputs into each node so matching
    # never has to chase the fail chain per position.
    root.fail = root
    queue = deque()
    for child in root.children.values():
        child.fail = root
        queue.append(child)
    while queue:
        node = queue.popleft()
        for tok, child in node.children.items():
            fail = node.fail
            while fail is not root and tok not in fail.children:
                fail = fail.fail
            child.fail = fail.children.get(tok, root)
            if child.fail is child:
                child.fail = root
            child.outputs = child.outputs + child.fail.outputs
            queue.append(child)
    return Matcher(
        entity_type=entity_type,
        taxonomy_version=taxonomy.version,
        pattern_count=len(index),
        _root=root,
    )


def _posting_fields(posting: JobPosting) -> list[tuple[PostingField, str]]:
    return [
        (PostingField.TITLE, posting.raw_title),
        (PostingField.DESCRIPTION, posting.description),
        (PostingField.COMPANY, posting.company_field),
    ]


def tag(matcher: Matcher, posting: JobPosting) -> list[EntityMention]:
    """All token-aligned alias matches over title, description, and company."""
    mentions: list[EntityMention] = []
    for fld, text in _posting_fields(posting):
        if not text:
            continue
        norm = normalize(text)
        for start, end, ids in matcher.find(norm.tokens):
            char_start = norm.char_spans[start][0]
            char_end = norm.char_spans[end - 1][1]
            surface = text[char_start:char_end]
            for eid in ids:
                mentions.append(
                    EntityMention(
                        entity_type=matcher.entity_type,
                        entity_id=eid,
                        surface=surface,
                        field=fld,
                        token_span=(start, end),
                        char_span=(char_start, char_end),
                    )
                )
    mentions.sort(key=EntityMention.sort_key)
    return mentions


def naive_tag(taxonomy: Taxonomy, entity_type: EntityType, posting: JobPosting) -> list[EntityMention]:
    """Reference oracle: per-alias sliding-window scan. Quadratic; tests only."""
    index = alias_index(taxonomy, entity_type)
    patterns = [(tuple(alias.split(" ")), ids) for alias, ids in index.items()]
    mentions: list[EntityMention] = []
    for fld, text in _posting_fields(posting):
        if not text:
            continue
        norm = normalize(text)
        n = len(norm.tokens)
        for pat, ids in patterns:
            m = len(pat)
            for start in range(0, n - m + 1):
                if tuple(norm.tokens[start : start + m]) == pat:
                    char_start = norm.char_spans[start][0]
                    char_end = norm.char_spans[start + m - 1][1]
                    for eid in ids:
                        mentions.append(
                            EntityMention(
                                entity_type=entity_type,
                                entity_id=eid,
                                surface=text[char_start:char_end],
                                field=fld,
                                token_span=(start, start + m),
                                char_span=(char_start, char_end),
                            )
                        )
    mentions.sort(key=EntityMention.sort_key)
    return mentions


def build_title_token_index(taxonomy: Taxonomy) -> dict[str, set[str]]:
    """Token -> title entity ids having any alias containing that token."""
    index: dict[str, set[str]] = {}
    for e in taxonomy.of_type(EntityType.TITLE):
        for alias in e.normalized_aliases():
            for tok in alias.split(" "):
                index.setdefault(tok, set()).add(e.id)
    return index


def title_candidates(raw_title: str, taxonomy: Taxonomy, token_index: dict[str, set[str]] | None = None) -> set[str]:
    """Title candidate retrieval: union of token-lookup hits over the raw title."""
    if token_index is None:
        token_index = build_title_token_index(taxonomy)
    out: set[str] = set()
    for tok in normalize(raw_title).tokens:
        out |= token_index.get(tok, set())
    return out


_SENTENCE_TERMINATORS = {".", "!", "?", "\n"}


def question_sentence_candidates(posting: JobPosting) -> list[tuple[str, tuple[int, int]]]:
    """Split the description into trimmed sentences with char spans.

    Split on . ! ? and newline; spans cover the trimmed sentence text and
    index into the description.
    """
    text = posting.description
    out: list[tuple[str, tuple[int, int]]] = []
    seg_start = 0
    for i in range(len(text) + 1):
        if i == len(text) or text[i] in _SENTENCE_TERMINATORS:
            lo, hi = seg_start, i
            while lo < hi and text[lo].isspace():
                lo += 1
            while hi > lo and text[hi - 1].isspace():
                hi -= 1
            if lo < hi:
                out.append((text[lo:hi], (lo, hi)))
            seg_start = i + 1
    return out
