"""Comparison-text construction, fuzzy normalization, and word counting.

Each variable yields three comparison texts: the raw label, the raw data
sheet description, and the label concatenated with keyword text derived
from the rule. Normalization (lowercase, punctuation strip, stopword
removal, stemming) applies only to fuzzy-matching inputs; embedding inputs
stay raw.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from typing import Protocol

from .stemmer import stem_fixpoint

# Rules longer than this many raw words go through keyword extraction.
RULE_WORD_GATE = 20
# Extracted keyword text is truncated to this many words.
MAX_KEYWORD_WORDS = 15

_NON_ALNUM = re.compile(r"[^0-9a-z]+")


def _load_stopwords() -> frozenset[str]:
    text = (
        resources.files("harmony.data")
        .joinpath("stopwords_en.txt")
        .read_text(encoding="utf-8")
    )
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


STOPWORDS: frozenset[str] = _load_stopwords()


@dataclass(frozen=True)
class MatchTexts:
    """The three texts a variable is compared on."""

    label_text: str
    sheet_text: str
    label_key_text: str

    def __post_init__(self) -> None:
        if not self.label_text:
            raise ValueError("label_text must be non-empty")
        if not self.label_key_text.startswith(self.label_text):
            raise ValueError("label_key_text must start with label_text")


class KeywordProvider(Protocol):
    """Extracts keyword text from a long derivation rule."""

    def keywords(self, text: str, max_words: int) -> str: ...


class LabeledRecord(Protocol):
    """Anything carrying a label and a sheet description."""

    @property
    def label(self) -> str: ...

    @property
    def sheet_desc(self) -> str: ...


def word_count(text: str) -> int:
    """Whitespace-token count of the raw text. No punctuation handling."""
    return len(text.split())


def normalize_for_fuzzy(text: str) -> list[str]:
    """Lowercase, strip punctuation, drop stopwords, stem each token.

    Token order is preserved and duplicates are kept; deduplication is the
    token-set scorer's job. Stemming runs to fixpoint so joining the output
    and normalizing again changes nothing.
    """
    lowered = _NON_ALNUM.sub(" ", text.lower())
    return [
        stem_fixpoint(token)
        for token in lowered.split()
        if token not in STOPWORDS
    ]


def term_frequency_keywords(text: str, max_words: int) -> str:
    """Fallback extractor: most frequent non-stopword raw tokens, in first-seen order.

    Used when no remote keyword service is configured. Output tokens are
    drawn verbatim from the rule text.
    """
    tokens = [t for t in text.split() if t.lower() not in STOPWORDS]
    if not tokens:
        tokens = text.split()
    counts = Counter(tokens)
    ranked = sorted(set(tokens), key=lambda t: (-counts[t], tokens.index(t)))
    return " ".join(ranked[:max_words])


class TermFrequencyExtractor:
    """KeywordProvider backed by term_frequency_keywords."""

    def keywords(self, text: str, max_words: int) -> str:
        return term_frequency_keywords(text, max_words)


def derive_keyword_text(rule: str, extractor: KeywordProvider) -> str:
    """Keep short rules verbatim; extract from long ones.

    Rules of RULE_WORD_GATE or fewer raw words pass through unchanged; longer
    rules are summarized by the extractor and truncated to MAX_KEYWORD_WORDS.
    """
    if not rule:
        return ""
    if word_count(rule) <= RULE_WORD_GATE:
        return rule
    extracted = extractor.keywords(rule, MAX_KEYWORD_WORDS)
    tokens = extracted.split()
    return " ".join(tokens[:MAX_KEYWORD_WORDS])


def build_match_texts(rec: LabeledRecord, keyword_text: str) -> MatchTexts:
    """Assemble the three comparison texts for one variable.

    label_key_text is the label alone when keyword_text is empty, so
    variables without derivation rules still have non-empty input.
    """
    if keyword_text:
        label_key = f"{rec.label}, {keyword_text}"
    else:
        label_key = rec.label
    return MatchTexts(
        label_text=rec.label, sheet_text=rec.sheet_desc, label_key_text=label_key
    )
