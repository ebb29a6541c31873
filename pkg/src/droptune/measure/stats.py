"""Wilcoxon rank-sum test and sample comparison."""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

EXACT_LIMIT = 16  # use the exact null distribution when |a| + |b| <= this


def midranks(values: Sequence[float]) -> list[float]:
    """1-based ranks, ties sharing the mean of the ranks they span."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        r = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = r
        i = j + 1
    return ranks


def _exact_counts(doubled: list[int], n1: int) -> dict[int, int]:
    """Number of size-n1 subsets of `doubled` ranks reaching each rank sum."""
    # table[k] maps subset-size k to {sum: count}
    table: list[Counter] = [Counter() for _ in range(n1 + 1)]
    table[0][0] = 1
    for r in doubled:
        for k in range(min(n1, len(doubled)), 0, -1):
            prev = table[k - 1]
            if prev:
                cur = table[k]
                for s, c in prev.items():
                    cur[s + r] += c
    return table[n1]


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided p-value of the rank-sum test of `a` against `b`."""
    n1, n2 = len(a), len(b)
    if n1 < 3 or n2 < 3:
        raise ValueError(f"rank-sum test needs at least 3 samples per group, got {n1} and {n2}")
    ranks = midranks(list(a) + list(b))
    n = n1 + n2
    w = sum(ranks[:n1])
    if n <= EXACT_LIMIT:
        doubled = [round(2 * r) for r in ranks]
        counts = _exact_counts(doubled, n1)
        total = sum(counts.values())
        w2 = round(2 * w)
        lower = sum(c for s, c in counts.items() if s <= w2) / total
        upper = sum(c for s, c in counts.items() if s >= w2) / total
        return min(1.0, 2 * min(lower, upper))
    mu = n1 * (n + 1) / 2
    ties = sum(t ** 3 - t for t in Counter(ranks).values())
    var = n1 * n2 / 12 * ((n + 1) - ties / (n * (n - 1)))
    if var <= 0:
        return 1.0
    z = max(abs(w - mu) - 0.5, 0.0) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2)))


FIRST_BETTER = "first_better"
SECOND_BETTER = "second_better"
TIE = "tie"


def compare(s1, s2, alpha: float) -> str:
    """Which of two Samples is faster at significance `alpha`.

    Non-ok samples lose against ok ones; two non-ok samples tie.
    """
    ok1, ok2 = s1.ok, s2.ok
    if not ok1 or not ok2:
        if ok1:
            return FIRST_BETTER
        if ok2:
            return SECOND_BETTER
        return TIE
    if wilcoxon_rank_sum(s1.timings, s2.timings) >= alpha:
        return TIE
    if s1.cost < s2.cost:
        return FIRST_BETTER
    if s2.cost < s1.cost:
        return SECOND_BETTER
    return TIE
