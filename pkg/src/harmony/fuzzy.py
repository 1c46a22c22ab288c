"""Edit-distance similarity: Levenshtein, indel ratio, token scorers.

The token scorers run over normalized token lists and use the indel
(insert/delete-only) similarity for the inner comparison, computed from the
longest common subsequence. LCS uses a bit-parallel scan over arbitrary
precision ints, which keeps the all-pairs scoring pass fast without native
extensions; the quadratic DP versions live in the test suite as oracles.
"""

from __future__ import annotations

from typing import Sequence


def levenshtein(a: str, b: str) -> int:
    """Minimum insert/delete/substitute operations turning a into b."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    cur = [0] * (len(b) + 1)
    for i, ca in enumerate(a, start=1):
        cur[0] = i
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev, cur = cur, prev
    return prev[len(b)]


def _lcs_length(a: str, b: str) -> int:
    """Hyyro's bit-parallel LCS length over big-int bitmasks."""
    if not a or not b:
        return 0
    masks: dict[str, int] = {}
    for i, ch in enumerate(a):
        masks[ch] = masks.get(ch, 0) | (1 << i)
    width = (1 << len(a)) - 1
    s = width
    for ch in b:
        u = s & masks.get(ch, 0)
        s = ((s + u) | (s - u)) & width
    # Zero bits of s mark matched positions.
    return len(a) - bin(s).count("1")


def indel_distance(a: str, b: str) -> int:
    """Insert/delete-only edit distance: |a| + |b| - 2*LCS."""
    return len(a) + len(b) - 2 * _lcs_length(a, b)


def indel_ratio(a: str, b: str) -> float:
    """Normalized indel similarity scaled to [0, 100].

    Two empty strings are identical, hence 100.
    """
    total = len(a) + len(b)
    if total == 0:
        return 100.0
    return (1.0 - indel_distance(a, b) / total) * 100.0


def token_sort_ratio(a: Sequence[str], b: Sequence[str]) -> float:
    """indel_ratio of the space-joined, alphabetically sorted tokens."""
    return indel_ratio(" ".join(sorted(a)), " ".join(sorted(b)))


def token_set_ratio(a: Sequence[str], b: Sequence[str]) -> float:
    """Duplicate-insensitive scorer built on shared and distinct token blocks.

    With deduplicated sets A and B: t0 joins the sorted intersection, t1
    appends A's leftovers to t0, t2 appends B's leftovers, and the score is
    the best pairwise indel_ratio among the three strings.
    """
    set_a, set_b = set(a), set(b)
    if not set_a and not set_b:
        return 100.0
    if not set_a or not set_b:
        return 0.0
    inter = " ".join(sorted(set_a & set_b))
    only_a = " ".join(sorted(set_a - set_b))
    only_b = " ".join(sorted(set_b - set_a))
    t0 = inter
    t1 = " ".join(part for part in (inter, only_a) if part)
    t2 = " ".join(part for part in (inter, only_b) if part)
    return max(
        indel_ratio(t0, t1),
        indel_ratio(t0, t2),
        indel_ratio(t1, t2),
    )
