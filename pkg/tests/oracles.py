"""Independent reference implementations used as test oracles.

These are written straight from the definitions, in exact rational
arithmetic where that is cheap, and share no code with the package.
"""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction
from itertools import combinations


def iou_exact(a, b) -> Fraction:
    (s1, e1), (s2, e2) = [(Fraction(x), Fraction(y)) for x, y in (a, b)]
    lo, hi = max(s1, s2), min(e1, e2)
    inter = hi - lo if hi > lo else Fraction(0)
    union = (e1 - s1) + (e2 - s2) - inter
    return inter / union if union else Fraction(0)


def best_within(scores, k):
    head = list(scores[:k])
    return max(head) if head else 0


def recall_oracle(scores, k, theta) -> int:
    return 1 if any(s > theta for s in scores[:k]) else 0


def axiou_oracle(scores, k) -> Fraction:
    scores = [Fraction(s) for s in scores]
    return sum((best_within(scores, j) for j in range(1, k + 1)), Fraction(0)) / k


def ncxiou_oracle(scores, weights) -> Fraction:
    scores = [Fraction(s) for s in scores]
    return sum(
        (Fraction(w) * best_within(scores, j) for j, w in enumerate(weights, start=1)),
        Fraction(0),
    )


def ap_oracle(scores, k, theta) -> Fraction:
    total = Fraction(0)
    for j in range(1, k + 1):
        hits = sum(1 for s in scores[:j] if s > theta)
        total += Fraction(hits, j)
    return total / k


def dcg_oracle(scores, k) -> float:
    return math.fsum(s / math.log2(i + 2) for i, s in enumerate(scores[:k]))


def tau_b_oracle(x, y) -> float:
    """Tau-b in its tie-group form: S / sqrt((n0 - n1)(n0 - n2))."""
    n = len(x)
    n0 = n * (n - 1) // 2
    n1 = sum(t * (t - 1) // 2 for t in Counter(x).values())
    n2 = sum(t * (t - 1) // 2 for t in Counter(y).values())
    sign = lambda v: (v > 0) - (v < 0)  # noqa: E731
    s = sum(sign(x[i] - x[j]) * sign(y[i] - y[j]) for i, j in combinations(range(n), 2))
    denom = (n0 - n1) * (n0 - n2)
    if denom == 0:
        return math.nan
    return s / math.sqrt(denom)
