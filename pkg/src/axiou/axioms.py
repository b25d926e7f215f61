"""Empirical checks of the INV-k and MON-k axioms.

INV-k: raising the IoU of a top-k moment that stays dominated by a
higher-ranked moment must leave the mean measure unchanged.  MON-k: raising
it so that it becomes the best moment of the top k must strictly increase
the mean measure.  ``check_axiom`` builds random runs, applies perturbations
that satisfy the axiom's conditions by construction, and counts violations.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import Infeasible, InvalidParameter
from .measures import Family, MeasureSpec, RelevanceList, score_matrix

INV_TOLERANCE = 1e-12
NUM_QUERIES = 8
EXTRA_RANKS = 2
MAX_ATTEMPTS = 50


class PerturbationKind(str, Enum):
    NON_BEST = "non_best"
    BEST = "best"


class Axiom(str, Enum):
    INV_K = "INV_K"
    MON_K = "MON_K"


KIND_FOR = {Axiom.INV_K: PerturbationKind.NON_BEST, Axiom.MON_K: PerturbationKind.BEST}


@dataclass(frozen=True)
class Perturbation:
    """Replace the score at ``rank`` (1-based) with a strictly larger one.

    ``prefix_max`` is the best score at ranks 1..rank-1, or None at rank 1.
    """

    query_id: str
    rank: int
    original: float
    replacement: float
    kind: PerturbationKind
    prefix_max: float | None

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise InvalidParameter(f"rank must be >= 1, got {self.rank}")
        if not 0.0 <= self.original < self.replacement <= 1.0:
            raise InvalidParameter(
                f"need 0 <= r < r' <= 1, got r={self.original}, r'={self.replacement}"
            )
        if (self.rank == 1) != (self.prefix_max is None):
            raise InvalidParameter("prefix_max must be None exactly at rank 1")
        if self.kind is PerturbationKind.NON_BEST:
            if self.rank == 1 or self.replacement > self.prefix_max:
                raise InvalidParameter("NON_BEST needs rank > 1 and r' <= prefix max")
        elif self.rank > 1 and not self.replacement > self.prefix_max:
            raise InvalidParameter("BEST needs r' > prefix max")

    def apply(self, scores) -> list[float]:
        out = list(scores)
        out[self.rank - 1] = self.replacement
        return out

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "rank": self.rank,
            "original": self.original,
            "replacement": self.replacement,
            "kind": self.kind.value,
            "prefix_max": self.prefix_max,
        }


def _feasible_interval(scores, i: int, kind, floor, ceiling):
    """Open-closed interval ``(lo, hi]`` for the replacement at index ``i``, or None."""
    r = scores[i]
    pm = max(scores[:i]) if i else None
    if kind is PerturbationKind.NON_BEST:
        if pm is None:
            return None
        lo, hi = r, pm
    else:
        lo = r if pm is None else max(r, pm)
        hi = 1.0
    if floor is not None:
        if r > floor:
            return None
        lo = max(lo, floor)
    if ceiling is not None:
        hi = min(hi, ceiling)
    if not lo < hi:
        return None
    return lo, hi


def generate_perturbation(
    rel,
    kind: PerturbationKind,
    seed=None,
    *,
    max_rank: int | None = None,
    floor: float | None = None,
    ceiling: float | None = None,
) -> Perturbation:
    """Draw a perturbation of ``kind`` uniformly over the feasible choices.

    The rank is uniform over feasible ranks (capped at ``max_rank``), then the
    replacement is uniform over its feasible interval.  ``floor`` forces
    ``r <= floor < r'``; ``ceiling`` forces ``r' <= ceiling``.  ``seed`` may be
    an int, a SeedSequence or a Generator.

    Raises Infeasible when no rank admits a perturbation.
    """
    kind = PerturbationKind(kind)
    query_id = rel.query_id if isinstance(rel, RelevanceList) else ""
    scores = list(rel.scores if isinstance(rel, RelevanceList) else rel)
    if not scores:
        raise Infeasible("empty relevance list")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    limit = len(scores) if max_rank is None else min(max_rank, len(scores))
    options = []
    for i in range(limit):
        interval = _feasible_interval(scores, i, kind, floor, ceiling)
        if interval is not None:
            options.append((i, interval))
    if not options:
        raise Infeasible(f"no feasible {kind.value} perturbation for {scores}")
    i, (lo, hi) = options[int(rng.integers(len(options)))]
    value = lo + (hi - lo) * (1.0 - rng.random())
    if not lo < value <= hi:
        value = hi
    return Perturbation(
        query_id=query_id,
        rank=i + 1,
        original=scores[i],
        replacement=float(value),
        kind=kind,
        prefix_max=max(scores[:i]) if i else None,
    )


@dataclass(frozen=True)
class AxiomVerdict:
    spec: MeasureSpec
    axiom: Axiom
    trials: int
    violations: int
    skipped: int
    witness: dict | None = None

    def __post_init__(self) -> None:
        if self.violations > self.trials:
            raise InvalidParameter("violations cannot exceed trials")
        if (self.witness is not None) != (self.violations > 0):
            raise InvalidParameter("witness must be present iff there are violations")

    @property
    def satisfied(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "measure": self.spec.name,
            "axiom": self.axiom.value,
            "trials": self.trials,
            "violations": self.violations,
            "skipped": self.skipped,
            "satisfied": self.satisfied,
            "witness": self.witness,
        }


def _violates(axiom: Axiom, before: float, after: float) -> bool:
    if axiom is Axiom.INV_K:
        return abs(after - before) > INV_TOLERANCE
    return not after > before


def _biased(spec: MeasureSpec, trial: int) -> bool:
    # odd trials of thresholded measures steer r, r' around theta
    return spec.family in (Family.RECALL, Family.AP) and trial % 2 == 1


def _one_trial(spec: MeasureSpec, axiom: Axiom, trial: int, rng: np.random.Generator):
    kind = KIND_FOR[axiom]
    width = spec.k + EXTRA_RANKS
    lengths = np.full(NUM_QUERIES, width)
    for _ in range(MAX_ATTEMPTS):
        rel = rng.random((NUM_QUERIES, width))
        q = int(rng.integers(NUM_QUERIES))
        floor = ceiling = None
        if _biased(spec, trial):
            if axiom is Axiom.MON_K:
                rel[q] *= spec.theta
                ceiling = spec.theta
            else:
                floor = spec.theta
        try:
            p = generate_perturbation(
                RelevanceList(f"q{q}", rel[q]), kind, rng,
                max_rank=spec.k, floor=floor, ceiling=ceiling,
            )
        except Infeasible:
            continue
        perturbed = rel.copy()
        perturbed[q] = p.apply(rel[q])
        before = float(score_matrix(rel, lengths, spec).mean())
        after = float(score_matrix(perturbed, lengths, spec).mean())
        return p, rel, perturbed, before, after
    return None


def check_axiom(spec: MeasureSpec, axiom: Axiom, trials: int, seed=0) -> AxiomVerdict:
    """Count violations of ``axiom`` for ``spec`` over ``trials`` random trials.

    Each trial uses its own child seed, so results do not depend on the
    order trials are executed in.  Trials where no perturbation could be
    constructed are counted as skipped (e.g. INV-k at K=1, where no rank
    k > 1 exists inside the cutoff).
    """
    axiom = Axiom(axiom)
    if trials < 1:
        raise InvalidParameter(f"trials must be >= 1, got {trials}")
    if axiom is Axiom.INV_K and spec.k < 2:
        return AxiomVerdict(spec, axiom, trials, 0, trials)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    violations = skipped = 0
    witness = None
    for t, child in enumerate(root.spawn(trials)):
        outcome = _one_trial(spec, axiom, t, np.random.default_rng(child))
        if outcome is None:
            skipped += 1
            continue
        p, rel, perturbed, before, after = outcome
        if _violates(axiom, before, after):
            violations += 1
            if witness is None:
                witness = {
                    "trial": t,
                    "perturbation": p.to_dict(),
                    "original_run": rel.tolist(),
                    "perturbed_run": perturbed.tolist(),
                    "original_mean": before,
                    "perturbed_mean": after,
                }
    return AxiomVerdict(spec, axiom, trials, violations, skipped, witness)


# which (family, axiom) cells the proofs say hold
EXPECTED = {
    (Family.RECALL, Axiom.INV_K): True,
    (Family.RECALL, Axiom.MON_K): False,
    (Family.AP, Axiom.INV_K): False,
    (Family.AP, Axiom.MON_K): False,
    (Family.DCG, Axiom.INV_K): False,
    (Family.DCG, Axiom.MON_K): True,
    (Family.AXIOU, Axiom.INV_K): True,
    (Family.AXIOU, Axiom.MON_K): True,
}


@dataclass(frozen=True)
class SatisfactionMatrix:
    k: int
    theta: float
    trials: int
    seed: int
    verdicts: tuple[AxiomVerdict, ...]

    def cell(self, family: Family, axiom: Axiom) -> AxiomVerdict:
        for v in self.verdicts:
            if v.spec.family is Family(family) and v.axiom is Axiom(axiom):
                return v
        raise KeyError((family, axiom))

    def unexpected_violations(self) -> list[AxiomVerdict]:
        """Cells the proofs say hold but where a violation was observed."""
        return [
            v for v in self.verdicts
            if EXPECTED[(v.spec.family, v.axiom)] and not v.satisfied
        ]

    def matches_expected(self) -> bool:
        return all(EXPECTED[(v.spec.family, v.axiom)] == v.satisfied for v in self.verdicts)

    def to_dict(self) -> dict:
        return {
            "K": self.k,
            "theta": self.theta,
            "trials": self.trials,
            "seed": self.seed,
            "matches_expected": self.matches_expected(),
            "cells": [
                dict(v.to_dict(), expected_satisfied=EXPECTED[(v.spec.family, v.axiom)])
                for v in self.verdicts
            ],
        }

    def to_rows(self) -> list[dict]:
        return [
            {
                "measure": v.spec.name,
                "axiom": v.axiom.value,
                "trials": v.trials,
                "violations": v.violations,
                "skipped": v.skipped,
                "satisfied": v.satisfied,
                "expected_satisfied": EXPECTED[(v.spec.family, v.axiom)],
            }
            for v in self.verdicts
        ]


def satisfaction_matrix(k: int, theta: float, trials: int, seed: int = 0) -> SatisfactionMatrix:
    specs = [
        MeasureSpec(Family.RECALL, k, theta=theta),
        MeasureSpec(Family.AP, k, theta=theta),
        MeasureSpec(Family.DCG, k),
        MeasureSpec(Family.AXIOU, k),
    ]
    verdicts = []
    for i, spec in enumerate(specs):
        for j, axiom in enumerate(Axiom):
            cell_seed = np.random.SeedSequence([seed, i, j])
            verdicts.append(check_axiom(spec, axiom, trials, cell_seed))
    return SatisfactionMatrix(k, theta, trials, seed, tuple(verdicts))
