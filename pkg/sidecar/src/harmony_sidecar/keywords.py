"""Keyword extraction for derivation rules.

Candidates are the distinct unigrams and bigrams of the input. Each candidate
is embedded with the keyword model and ranked by cosine against the whole
text; words are then collected greedily in rank order, skipping words already
chosen, until the word budget is filled. Every output word is a verbatim
token of the input, so the result is always a subset of the text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .encoder import Encoder

WORD_RE = re.compile(r"[A-Za-z0-9_]+")

# Candidate generation scans at most this many leading words; the tokenizer
# truncates the document embedding at a similar scale anyway.
MAX_SCANNED_WORDS = 256


class EmptyTextError(ValueError):
    """No extractable words in the input."""


@dataclass(frozen=True)
class _Candidate:
    words: tuple[str, ...]
    key: tuple[str, ...]  # lowercased, for dedup


def _candidates(words: list[str]) -> list[_Candidate]:
    seen: set[tuple[str, ...]] = set()
    out: list[_Candidate] = []
    grams = [(w,) for w in words]
    grams += [(words[i], words[i + 1]) for i in range(len(words) - 1)]
    for gram in grams:
        key = tuple(w.lower() for w in gram)
        if key in seen:
            continue
        seen.add(key)
        out.append(_Candidate(words=gram, key=key))
    return out


def extract_keywords(encoder: Encoder, text: str, max_words: int = 15) -> str:
    if max_words < 1:
        raise ValueError("max_words must be >= 1")
    words = WORD_RE.findall(text)[:MAX_SCANNED_WORDS]
    if not words:
        raise EmptyTextError("text has no extractable words")
    cands = _candidates(words)
    vectors = encoder.encode([text] + [" ".join(c.words) for c in cands])
    doc, cand_vecs = vectors[0], vectors[1:]
    sims = cand_vecs @ doc  # unit vectors, so dot is cosine
    order = sorted(range(len(cands)), key=lambda i: (-sims[i], i))

    chosen: list[str] = []
    covered: set[str] = set()
    for i in order:
        fresh: list[str] = []
        for w in cands[i].words:
            # a gram like ("cost", "cost") must not emit the word twice
            if w.lower() not in covered and w.lower() not in (
                x.lower() for x in fresh
            ):
                fresh.append(w)
        if not fresh or len(fresh) > max_words - len(chosen):
            continue
        chosen.extend(fresh)
        covered.update(w.lower() for w in fresh)
        if len(chosen) == max_words:
            break
    return " ".join(chosen)
