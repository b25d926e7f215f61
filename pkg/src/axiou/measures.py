"""Data model, temporal IoU and the per-query / mean evaluation measures.

Two evaluation paths live here.  The scalar functions (``recall_at``,
``axiou_at``, ...) take one relevance list and are written for clarity.
``score_matrix`` evaluates a whole padded relevance matrix at once and is
what ``mean_measure`` and the experiments use; the test-suite checks the
two paths against each other.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import (
    EmptyQuerySet,
    InvalidInterval,
    InvalidParameter,
    MissingAnnotation,
    MissingPrediction,
    SpecParseError,
)

WEIGHT_TOLERANCE = 1e-12


# ---------------------------------------------------------------------------
# data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Interval:
    """A closed temporal segment ``[start, end]`` in seconds."""

    start: float
    end: float

    def __post_init__(self) -> None:
        start, end = float(self.start), float(self.end)
        if not (math.isfinite(start) and math.isfinite(end)):
            raise InvalidInterval(f"non-finite interval [{start}, {end}]")
        if end < start:
            raise InvalidInterval(f"interval end {end} < start {start}")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class GroundTruth:
    """Query id -> annotated interval, plus optional video durations."""

    entries: Mapping[str, Interval]
    durations: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for qid, d in self.durations.items():
            if not d > 0:
                raise InvalidParameter(f"duration for {qid!r} must be > 0, got {d}")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, query_id: object) -> bool:
        return query_id in self.entries

    def __getitem__(self, query_id: str) -> Interval:
        try:
            return self.entries[query_id]
        except KeyError:
            raise MissingAnnotation(query_id) from None

    @property
    def query_ids(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def bounds(self, query_ids: Sequence[str]) -> np.ndarray:
        """``(Q, 2)`` array of ``[start, end]`` rows in ``query_ids`` order."""
        out = np.empty((len(query_ids), 2))
        for i, qid in enumerate(query_ids):
            iv = self[qid]
            out[i] = iv.start, iv.end
        return out

    def duration_array(self, query_ids: Sequence[str]) -> np.ndarray:
        """Durations per query; ``inf`` where unknown."""
        return np.array([self.durations.get(q, np.inf) for q in query_ids], dtype=float)


@dataclass(frozen=True)
class RankedList:
    """Moments returned for one query, rank 1 first.  Duplicates are allowed."""

    query_id: str
    moments: tuple[Interval, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "moments", tuple(self.moments))

    def __len__(self) -> int:
        return len(self.moments)

    @cached_property
    def bounds(self) -> np.ndarray:
        if not self.moments:
            return np.zeros((0, 2))
        return np.array([(m.start, m.end) for m in self.moments], dtype=float)


@dataclass(frozen=True)
class Run:
    """One system's ranked lists keyed by query id."""

    system_id: str
    lists: Mapping[str, RankedList]

    @classmethod
    def from_moments(
        cls, system_id: str, moments: Mapping[str, Iterable[tuple[float, float]]]
    ) -> Run:
        lists = {
            qid: RankedList(qid, tuple(Interval(s, e) for s, e in ms))
            for qid, ms in moments.items()
        }
        return cls(system_id, lists)

    @classmethod
    def from_arrays(
        cls,
        system_id: str,
        query_ids: Sequence[str],
        bounds: np.ndarray,
        lengths: np.ndarray,
    ) -> Run:
        """Build a run from padded ``(Q, L, 2)`` bounds without materialising lists.

        Ranked lists are created on first access; the array form is kept
        and reused by ``moment_array`` for the same query order.
        """
        bounds = np.asarray(bounds, dtype=float)
        lengths = np.asarray(lengths, dtype=np.int64)
        ids = tuple(query_ids)
        if bounds.ndim != 3 or bounds.shape[0] != len(ids) or bounds.shape[2] != 2:
            raise InvalidParameter(f"bounds must be (Q, L, 2), got {bounds.shape}")
        if len(set(ids)) != len(ids):
            raise InvalidParameter("duplicate query ids")
        valid = np.arange(bounds.shape[1])[None, :] < lengths[:, None]
        if np.any(valid & ~(bounds[..., 1] >= bounds[..., 0])):
            raise InvalidInterval("moment with end < start")
        if not np.all(np.isfinite(bounds[valid])):
            raise InvalidInterval("non-finite moment bounds")
        run = cls(system_id, _ArrayLists(ids, bounds, lengths))
        run.__dict__["_moment_cache"] = {ids: (bounds, lengths)}
        return run

    @property
    def query_ids(self) -> tuple[str, ...]:
        return tuple(self.lists)

    def moment_array(self, query_ids: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        """Zero-padded ``(Q, L, 2)`` moment bounds and the ``(Q,)`` list lengths.

        Raises MissingPrediction if a query has no list.  Results are cached
        per query-id tuple; runs are immutable so the cache never goes stale.
        """
        key = tuple(query_ids)
        cache = self.__dict__.setdefault("_moment_cache", {})
        if key in cache:
            return cache[key]
        lists = []
        for qid in key:
            try:
                lists.append(self.lists[qid])
            except KeyError:
                raise MissingPrediction(qid, self.system_id) from None
        lengths = np.array([len(rl) for rl in lists], dtype=np.int64)
        width = int(lengths.max()) if len(lengths) else 0
        bounds = np.zeros((len(key), width, 2))
        for i, rl in enumerate(lists):
            if len(rl):
                bounds[i, : len(rl)] = rl.bounds
        cache[key] = (bounds, lengths)
        return bounds, lengths


class _ArrayLists(Mapping):
    """Read-only query id -> RankedList view over padded moment arrays."""

    def __init__(self, ids, bounds, lengths):
        self._index = {q: i for i, q in enumerate(ids)}
        self._bounds = bounds
        self._lengths = lengths
        self._made: dict[str, RankedList] = {}

    def __getitem__(self, qid: str) -> RankedList:
        if qid not in self._made:
            i = self._index[qid]
            rows = self._bounds[i, : self._lengths[i]]
            self._made[qid] = RankedList(qid, tuple(Interval(s, e) for s, e in rows.tolist()))
        return self._made[qid]

    def __iter__(self):
        return iter(self._index)

    def __len__(self) -> int:
        return len(self._index)


@dataclass(frozen=True)
class RelevanceList:
    """IoU scores of a ranked list, in rank order."""

    query_id: str
    scores: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        scores = tuple(float(s) for s in self.scores)
        for s in scores:
            if not 0.0 <= s <= 1.0:
                raise InvalidParameter(f"relevance score {s} outside [0, 1]")
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return len(self.scores)


class Family(str, Enum):
    RECALL = "recall"
    AXIOU = "axiou"
    NCXIOU = "ncxiou"
    AP = "ap"
    DCG = "dcg"


def _log2_discount(k):
    return np.log2(np.asarray(k, dtype=float) + 1.0)


@dataclass(frozen=True)
class MeasureSpec:
    """A named, parameterised measure.

    ``theta`` is required for RECALL and AP, ``abandonment`` (weights over
    ranks 1..K) for NCXIOU.  DCG accepts optional ``gain``/``discount``
    callables that must work elementwise on numpy arrays.
    """

    family: Family
    k: int
    theta: float | None = None
    abandonment: tuple[float, ...] | None = None
    gain: Callable | None = field(default=None, compare=False)
    discount: Callable | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise InvalidParameter(f"K must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))
        needs_theta = self.family in (Family.RECALL, Family.AP)
        if needs_theta:
            if self.theta is None:
                raise InvalidParameter(f"{self.family.value} requires theta")
            theta = float(self.theta)
            if not 0.0 <= theta <= 1.0:
                raise InvalidParameter(f"theta must lie in [0, 1], got {theta}")
            object.__setattr__(self, "theta", theta)
        elif self.theta is not None:
            raise InvalidParameter(f"{self.family.value} takes no theta")
        if self.family is Family.NCXIOU:
            if self.abandonment is None:
                raise InvalidParameter("ncxiou requires an abandonment distribution")
            weights = tuple(float(w) for w in self.abandonment)
            if len(weights) != self.k:
                raise InvalidParameter(
                    f"abandonment has {len(weights)} weights but K={self.k}"
                )
            check_abandonment(weights)
            object.__setattr__(self, "abandonment", weights)
        elif self.abandonment is not None:
            raise InvalidParameter(f"{self.family.value} takes no abandonment weights")
        if self.family is not Family.DCG and (self.gain or self.discount):
            raise InvalidParameter("gain/discount only apply to dcg")

    @property
    def name(self) -> str:
        base = f"{self.family.value}@{self.k}"
        if self.theta is not None:
            return f"{base}:{self.theta:g}"
        if self.family is Family.NCXIOU:
            return base + ":" + ",".join(f"{w:g}" for w in self.abandonment)
        if self.gain or self.discount:
            return base + ":custom"
        return base

    def __str__(self) -> str:
        return self.name

    @classmethod
    def parse(cls, text: str) -> MeasureSpec:
        """Parse ``family@K[:theta]`` (``ncxiou@K:w1,...,wK`` for weights)."""
        token = text.strip()
        head, sep, param = token.partition(":")
        family_str, at, k_str = head.partition("@")
        try:
            family = Family(family_str.strip().lower())
        except ValueError:
            raise SpecParseError(token) from None
        if not at:
            raise SpecParseError(token, "expected family@K")
        try:
            k = int(k_str)
        except ValueError:
            raise SpecParseError(token, f"K must be an integer, got {k_str!r}") from None
        try:
            if family in (Family.RECALL, Family.AP):
                if not sep:
                    raise SpecParseError(token, f"{family.value} needs ':theta'")
                return cls(family, k, theta=float(param))
            if family is Family.NCXIOU:
                if not sep:
                    return cls(family, k, abandonment=uniform_abandonment(k))
                weights = tuple(float(w) for w in param.split(","))
                return cls(family, k, abandonment=weights)
            if sep:
                raise SpecParseError(token, f"{family.value} takes no parameter")
            return cls(family, k)
        except SpecParseError:
            raise
        except (ValueError, InvalidParameter) as exc:
            raise SpecParseError(token, str(exc)) from None


def parse_specs(texts: str | Iterable[str]) -> list[MeasureSpec]:
    """Parse a comma/space separated list, or an iterable, of spec strings.

    Commas inside an ncxiou weight list are kept together.
    """
    if isinstance(texts, str):
        texts = texts.split()
    tokens: list[str] = []
    for chunk in texts:
        for part in chunk.split(","):
            part = part.strip()
            if not part:
                continue
            if "@" not in part and tokens:
                tokens[-1] += "," + part
            else:
                tokens.append(part)
    return [MeasureSpec.parse(t) for t in tokens]


def uniform_abandonment(k: int) -> tuple[float, ...]:
    return (1.0 / k,) * k


def check_abandonment(weights: Sequence[float]) -> None:
    if len(weights) == 0:
        raise InvalidParameter("abandonment distribution is empty")
    if any(w < 0 or not math.isfinite(w) for w in weights):
        raise InvalidParameter("abandonment weights must be finite and nonnegative")
    if abs(math.fsum(weights) - 1.0) > WEIGHT_TOLERANCE:
        raise InvalidParameter(f"abandonment weights sum to {math.fsum(weights)}, not 1")


# ---------------------------------------------------------------------------
# scalar path
# ---------------------------------------------------------------------------


def temporal_iou(a: Interval, b: Interval) -> float:
    inter = max(0.0, min(a.end, b.end) - max(a.start, b.start))
    union = a.length + b.length - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def relevance_list(ranked: RankedList, gt: GroundTruth) -> RelevanceList:
    target = gt[ranked.query_id]
    return RelevanceList(ranked.query_id, tuple(temporal_iou(m, target) for m in ranked.moments))


def _scores(rel) -> tuple[float, ...]:
    if isinstance(rel, RelevanceList):
        return rel.scores
    return tuple(float(s) for s in rel)


def _check_k(k: int) -> None:
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise InvalidParameter(f"K must be a positive integer, got {k!r}")


def _check_theta(theta: float) -> None:
    if not 0.0 <= theta <= 1.0:
        raise InvalidParameter(f"theta must lie in [0, 1], got {theta}")


def running_max(rel, k: int) -> list[float]:
    """Best score seen within the top 1..k, extended flat past the list end."""
    scores = _scores(rel)
    out, best = [], 0.0
    for i in range(k):
        if i < len(scores):
            best = max(best, scores[i]) if i else scores[0]
        out.append(best)
    return out


def recall_at(rel, k: int, theta: float) -> int:
    """1 if some top-k score strictly exceeds ``theta``, else 0."""
    _check_k(k)
    _check_theta(theta)
    top = _scores(rel)[:k]
    return int(bool(top) and max(top) > theta)


def ncxiou(rel, abandonment: Sequence[float]) -> float:
    """Expected running-max IoU under an abandonment distribution over ranks."""
    weights = tuple(float(w) for w in abandonment)
    check_abandonment(weights)
    return sum(w * u for w, u in zip(weights, running_max(rel, len(weights))))


def axiou_at(rel, k: int) -> float:
    """Average over ranks 1..k of the running maximum IoU."""
    _check_k(k)
    return ncxiou(rel, uniform_abandonment(k))


def ap_at(rel, k: int, theta: float) -> float:
    _check_k(k)
    _check_theta(theta)
    scores = _scores(rel)
    total, hits = 0.0, 0
    for i in range(1, k + 1):
        if i <= len(scores) and scores[i - 1] > theta:
            hits += 1
        total += hits / i
    return total / k


def dcg_at(rel, k: int, gain: Callable | None = None, discount: Callable | None = None) -> float:
    _check_k(k)
    gain = gain or (lambda r: r)
    discount = discount or (lambda i: math.log2(i + 1))
    scores = _scores(rel)[:k]
    return sum(float(gain(r)) / float(discount(i)) for i, r in enumerate(scores, start=1))


def recall_threshold_integral(rel, k: int) -> float:
    """Closed form of the integral of R@k,theta over theta in [0, 1].

    The indicator ``1{x > theta}`` integrates to ``x`` for ``x`` in [0, 1],
    so the integral is the best top-k score.
    """
    _check_k(k)
    top = _scores(rel)[:k]
    return max(top) if top else 0.0


def evaluate_scalar(rel, spec: MeasureSpec) -> float:
    """Evaluate one relevance list under ``spec`` through the scalar path."""
    if spec.family is Family.RECALL:
        return float(recall_at(rel, spec.k, spec.theta))
    if spec.family is Family.AXIOU:
        return axiou_at(rel, spec.k)
    if spec.family is Family.NCXIOU:
        return ncxiou(rel, spec.abandonment)
    if spec.family is Family.AP:
        return ap_at(rel, spec.k, spec.theta)
    return dcg_at(rel, spec.k, spec.gain, spec.discount)


# ---------------------------------------------------------------------------
# batch path
# ---------------------------------------------------------------------------


def batch_iou(bounds: np.ndarray, lengths: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """IoU of each padded moment against its query's target interval.

    ``bounds`` is ``(Q, L, 2)``, ``targets`` is ``(Q, 2)``.  Padding slots
    (rank > list length) come out as 0.
    """
    s, e = bounds[..., 0], bounds[..., 1]
    ts, te = targets[:, 0:1], targets[:, 1:2]
    inter = np.clip(np.minimum(e, te) - np.maximum(s, ts), 0.0, None)
    union = (e - s) + (te - ts) - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0.0, inter / np.where(union > 0.0, union, 1.0), 0.0)
    mask = np.arange(bounds.shape[1])[None, :] < lengths[:, None]
    return np.where(mask, iou, 0.0)


def _topk(rel: np.ndarray, k: int) -> np.ndarray:
    """First k columns, zero-padded on the right when the matrix is narrower."""
    top = rel[:, :k]
    if top.shape[1] < k:
        top = np.pad(top, ((0, 0), (0, k - top.shape[1])))
    return top


def running_max_matrix(rel: np.ndarray, k: int) -> np.ndarray:
    return np.maximum.accumulate(_topk(rel, k), axis=1)


def score_matrix(rel: np.ndarray, lengths: np.ndarray, spec: MeasureSpec) -> np.ndarray:
    """Per-query scores for a zero-padded ``(Q, L)`` relevance matrix.

    Zero padding beyond each list's length is what makes short lists work:
    the running max stays flat and no padded slot clears a threshold.
    """
    rel = np.asarray(rel, dtype=float)
    k = spec.k
    fam = spec.family
    if fam is Family.RECALL:
        return (_topk(rel, k).max(axis=1) > spec.theta).astype(float)
    if fam in (Family.AXIOU, Family.NCXIOU):
        weights = spec.abandonment if fam is Family.NCXIOU else uniform_abandonment(k)
        return running_max_matrix(rel, k) @ np.asarray(weights)
    if fam is Family.AP:
        hits = np.cumsum(_topk(rel, k) > spec.theta, axis=1)
        return (hits / np.arange(1, k + 1)).sum(axis=1) / k
    top = _topk(rel, k)
    ranks = np.arange(1, k + 1)
    gain = spec.gain(top) if spec.gain else top
    disc = spec.discount(ranks) if spec.discount else _log2_discount(ranks)
    valid = ranks[None, :] <= np.asarray(lengths)[:, None]
    return np.where(valid, np.asarray(gain, dtype=float) / disc, 0.0).sum(axis=1)


def relevance_matrix(
    run: Run, gt: GroundTruth, query_ids: Sequence[str]
) -> tuple[np.ndarray, np.ndarray]:
    bounds, lengths = run.moment_array(query_ids)
    return batch_iou(bounds, lengths, gt.bounds(query_ids)), lengths


@dataclass(frozen=True)
class Evaluation:
    """Mean of a measure over a query set, with the per-query vector kept."""

    system_id: str
    spec: MeasureSpec
    query_ids: tuple[str, ...]
    per_query: np.ndarray
    mean: float

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.query_ids, self.per_query.tolist()))


def resolve_queries(gt: GroundTruth, query_ids: Sequence[str] | None) -> tuple[str, ...]:
    ids = gt.query_ids if query_ids is None else tuple(query_ids)
    if not ids:
        raise EmptyQuerySet("the evaluated query set is empty")
    for qid in ids:
        if qid not in gt:
            raise MissingAnnotation(qid)
    return ids


def mean_measure(
    run: Run,
    gt: GroundTruth,
    spec: MeasureSpec,
    query_ids: Sequence[str] | None = None,
) -> Evaluation:
    """Evaluate ``run`` under ``spec`` on ``query_ids`` (default: all of ``gt``)."""
    ids = resolve_queries(gt, query_ids)
    rel, lengths = relevance_matrix(run, gt, ids)
    per_query = score_matrix(rel, lengths, spec)
    return Evaluation(run.system_id, spec, ids, per_query, float(per_query.mean()))


def evaluate_all(
    runs: Sequence[Run],
    gt: GroundTruth,
    specs: Sequence[MeasureSpec],
    query_ids: Sequence[str] | None = None,
) -> np.ndarray:
    """``(len(specs), len(runs), Q)`` array of per-query scores."""
    ids = resolve_queries(gt, query_ids)
    out = np.empty((len(specs), len(runs), len(ids)))
    for j, run in enumerate(runs):
        rel, lengths = relevance_matrix(run, gt, ids)
        for i, spec in enumerate(specs):
            out[i, j] = score_matrix(rel, lengths, spec)
    return out
