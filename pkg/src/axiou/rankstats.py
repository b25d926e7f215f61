"""System rankings, Kendall's tau-b, measure agreement and tie analysis."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, InvalidParameter, UndefinedCorrelation
from .measures import GroundTruth, MeasureSpec, Run, evaluate_all

TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SystemRanking:
    """(system id, score) pairs, best first.  Equal scores stay tied."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        for sid, score in self.entries:
            if not math.isfinite(score):
                raise InvalidParameter(f"non-finite score for {sid!r}")

    @property
    def system_ids(self) -> tuple[str, ...]:
        return tuple(sid for sid, _ in self.entries)

    def scores(self) -> dict[str, float]:
        return dict(self.entries)


def rank_systems(scores: Mapping[str, float]) -> SystemRanking:
    # id order among equal scores is for display only; tau-b sees the tie
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return SystemRanking(tuple((sid, float(s)) for sid, s in ordered))


def pair_counts(x: Sequence[float], y: Sequence[float]) -> tuple[int, int, int, int]:
    """Concordant, discordant, tied-only-in-x and tied-only-in-y pair counts."""
    c = d = tx = ty = 0
    n = len(x)
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                tx += 1
            elif dy == 0:
                ty += 1
            elif (dx > 0) == (dy > 0):
                c += 1
            else:
                d += 1
    return c, d, tx, ty


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float:
    """Kendall's tau-b between two score vectors, by pair enumeration.

    Raises InvalidInput on mismatched or too-short input and
    UndefinedCorrelation when either vector is entirely tied.
    """
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if len(x) != len(y):
        raise InvalidInput(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise InvalidInput("need at least two items")
    c, d, tx, ty = pair_counts(x, y)
    denom = (c + d + tx) * (c + d + ty)
    if denom == 0:
        raise UndefinedCorrelation("tau-b undefined: a ranking is entirely tied")
    return (c - d) / math.sqrt(denom)


def tau_or_none(x, y) -> float | None:
    try:
        return kendall_tau_b(x, y)
    except UndefinedCorrelation:
        return None


@dataclass(frozen=True)
class AgreementMatrix:
    """Pairwise tau-b between system rankings; None marks an undefined cell."""

    measures: tuple[MeasureSpec, ...]
    values: tuple[tuple[float | None, ...], ...]
    system_ids: tuple[str, ...] = ()

    @property
    def names(self) -> list[str]:
        return [m.name for m in self.measures]

    def get(self, a: MeasureSpec | str, b: MeasureSpec | str) -> float | None:
        names = self.names
        i = names.index(a if isinstance(a, str) else a.name)
        j = names.index(b if isinstance(b, str) else b.name)
        return self.values[i][j]

    def to_dict(self) -> dict:
        return {"measures": self.names, "systems": list(self.system_ids),
                "tau_b": [list(row) for row in self.values]}

    def to_rows(self) -> list[dict]:
        names = self.names
        return [
            {"measure": name, **dict(zip(names, row))}
            for name, row in zip(names, self.values)
        ]


def _run_means(runs, gt, specs, query_ids=None) -> np.ndarray:
    if len(runs) < 2:
        raise InvalidInput("need at least two runs")
    return evaluate_all(runs, gt, specs, query_ids).mean(axis=2)


def agreement_matrix(
    runs: Sequence[Run],
    gt: GroundTruth,
    specs: Sequence[MeasureSpec],
    query_ids: Sequence[str] | None = None,
) -> AgreementMatrix:
    means = _run_means(runs, gt, specs, query_ids)
    n = len(specs)
    values = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            values[i][j] = values[j][i] = tau_or_none(means[i], means[j])
    return AgreementMatrix(
        tuple(specs), tuple(tuple(r) for r in values), tuple(r.system_id for r in runs)
    )


def all_tied_ratio(
    runs: Sequence[Run],
    gt: GroundTruth,
    spec: MeasureSpec,
    query_ids: Sequence[str] | None = None,
) -> float:
    """Fraction of queries on which every run gets the same score under ``spec``."""
    if len(runs) < 2:
        raise InvalidInput("need at least two runs")
    scores = evaluate_all(runs, gt, [spec], query_ids)[0]
    spread = scores.max(axis=0) - scores.min(axis=0)
    return float(np.mean(spread <= TIE_TOLERANCE))
