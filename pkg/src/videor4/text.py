"""String normalization, edit distance, and fuzzy relevance scores.

These primitives back both evidence matching and answer metrics, so they
live in one place and are kept pure.
"""

from __future__ import annotations

import re
import string

_WHITESPACE = re.compile(r"\s+")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_light(text: str) -> str:
    """Lowercase and trim; internal whitespace untouched."""
    return text.lower().strip()


def normalize_answer(text: str) -> str:
    """Lowercase, trim, collapse internal whitespace runs to single spaces."""
    return _WHITESPACE.sub(" ", text.lower().strip())


def strip_punctuation(text: str) -> str:
    return text.translate(_PUNCT_TABLE)


def tokenize(text: str) -> set[str]:
    """Normalized token set: lowercase, punctuation-stripped, deduplicated."""
    return set(token_bag(text))


def token_bag(text: str) -> list[str]:
    """Normalized token list with multiplicity preserved."""
    return [tok for tok in strip_punctuation(text.lower()).split() if tok]


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance, single-row dynamic program."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1,
                           cur[j - 1] + 1,
                           prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def normalized_levenshtein(a: str, b: str) -> float:
    """edit_distance / max length; 0 when both strings are empty."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return edit_distance(a, b) / longest


def score_text(s: str, answers: list[str] | tuple[str, ...]) -> float:
    """Best fuzzy similarity between ``s`` and any answer, in [0, 1]."""
    if not answers:
        raise ValueError("answers must be non-empty")
    ns = normalize_light(s)
    return max(1.0 - normalized_levenshtein(ns, normalize_light(a)) for a in answers)


def score_name(name: str, tokens: set[str]) -> float:
    """Best fuzzy similarity between ``name`` and any token; 0 for empty sets."""
    if not tokens:
        return 0.0
    nn = normalize_light(name)
    return max(1.0 - normalized_levenshtein(nn, tok) for tok in tokens)
