"""Ranked-list construction and retrieval metrics: HR-n, RR, MRR.

Ties (exact score equality) share the median of the positions they occupy,
so three equal scores at positions 4-6 all get rank 5 and an even group
gets a half-integer rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import GoldMissingError

HR_CUTOFFS = (5, 10, 15, 20, 30)


@dataclass(frozen=True)
class RankedEntry:
    target_name: str
    score: float
    assigned_rank: float


@dataclass(frozen=True)
class RankedList:
    """All candidates for one source, sorted by score descending."""

    source_name: str
    entries: tuple[RankedEntry, ...]
    gold_targets: frozenset[str]

    def rank_of(self, target_name: str) -> float:
        for entry in self.entries:
            if entry.target_name == target_name:
                return entry.assigned_rank
        raise KeyError(target_name)

    def best_gold_rank(self) -> float:
        ranks = [e.assigned_rank for e in self.entries if e.target_name in self.gold_targets]
        if not ranks:
            raise GoldMissingError(self.source_name)
        return min(ranks)


@dataclass(frozen=True)
class MetricReport:
    hr: Mapping[int, float]
    mrr: float
    per_source_rr: Mapping[str, float]


def assign_ranks(scores: Sequence[float]) -> list[float]:
    """Median-of-positions ranks for scores sorted descending.

    A tie group of size g occupying 1-based positions p..p+g-1 receives
    (2p + g - 1) / 2: the middle position for odd g, the mean of the two
    middle positions for even g.
    """
    n = len(scores)
    order = sorted(range(n), key=lambda i: -scores[i])
    ranks = [0.0] * n
    pos = 0
    while pos < n:
        end = pos
        while end + 1 < n and scores[order[end + 1]] == scores[order[pos]]:
            end += 1
        g = end - pos + 1
        p = pos + 1
        rank = (2 * p + g - 1) / 2
        for k in range(pos, end + 1):
            ranks[order[k]] = rank
        pos = end + 1
    return ranks


def rank_candidates(
    source_name: str,
    target_names: Sequence[str],
    scores: Sequence[float],
    gold_targets: frozenset[str] | set[str],
) -> RankedList:
    """Build a RankedList with tie-aware ranks from raw scores."""
    ranks = assign_ranks(scores)
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], target_names[i]))
    entries = tuple(
        RankedEntry(
            target_name=target_names[i], score=float(scores[i]), assigned_rank=ranks[i]
        )
        for i in order
    )
    return RankedList(
        source_name=source_name,
        entries=entries,
        gold_targets=frozenset(gold_targets),
    )


def reciprocal_rank(ranked: RankedList) -> float:
    """1 / best (smallest) assigned rank over the gold targets."""
    return 1.0 / ranked.best_gold_rank()


def hit_ratio(lists: Sequence[RankedList], n: int) -> float:
    """Fraction of sources whose best gold rank is within the top n."""
    if not lists:
        raise ValueError("no ranked lists")
    hits = sum(1 for rl in lists if rl.best_gold_rank() <= n)
    return hits / len(lists)


def mrr(lists: Sequence[RankedList]) -> float:
    """Mean reciprocal rank over sources."""
    if not lists:
        raise ValueError("no ranked lists")
    return sum(reciprocal_rank(rl) for rl in lists) / len(lists)


def metric_report(lists: Sequence[RankedList], cutoffs: Sequence[int] = HR_CUTOFFS) -> MetricReport:
    per_source = {rl.source_name: reciprocal_rank(rl) for rl in lists}
    return MetricReport(
        hr={n: hit_ratio(lists, n) for n in cutoffs},
        mrr=mrr(lists),
        per_source_rr=per_source,
    )


def best_gold_ranks_from_scores(
    scores: np.ndarray, gold_mask: np.ndarray
) -> float:
    """Best gold rank directly from a score vector, without list objects.

    For each gold candidate the assigned rank equals
    count(strictly greater) + (count(equal) + 1) / 2, which matches the
    median-of-positions rule; the minimum over gold candidates is returned.
    Used in inner loops where building RankedList objects is too slow.
    """
    gold_scores = scores[gold_mask]
    if gold_scores.size == 0:
        raise GoldMissingError("<unnamed>")
    best = np.inf
    for gs in gold_scores:
        greater = int(np.sum(scores > gs))
        equal = int(np.sum(scores == gs))
        rank = greater + (equal + 1) / 2
        if rank < best:
            best = rank
    return float(best)
