"""Text normalization shared by the taxonomy and the taggers.

Tokens are maximal runs of letters/digits, case-folded. Everything else is a
separator. No stemming: the taggers and the taxonomy alias lists must agree
token-for-token.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class NormalizedText:
    tokens: tuple[str, ...]
    char_spans: tuple[tuple[int, int], ...]  # 0-based, end-exclusive, into the original text


def normalize(text: str) -> NormalizedText:
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    start = None
    for i, ch in enumerate(text):
        if ch.isalnum():
            if start is None:
                start = i
        else:
            if start is not None:
                tokens.append(text[start:i].casefold())
                spans.append((start, i))
                start = None
    if start is not None:
        tokens.append(text[start:].casefold())
        spans.append((start, len(text)))
    return NormalizedText(tokens=tuple(tokens), char_spans=tuple(spans))


def tokenize(text: str) -> tuple[str, ...]:
    return normalize(text).tokens


def normalize_key(text: str) -> str:
    """Canonical single-string form: normalized tokens joined by one space."""
    return " ".join(tokenize(text))
