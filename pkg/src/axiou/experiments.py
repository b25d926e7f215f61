"""Stochastic protocols: subsampling stability, label noise, model selection.

Every experiment derives its random streams from positions (seed, setting
index, trial/replica index), so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAnnotation, InsufficientQueries, InvalidParameter
from .measures import (
    GroundTruth,
    Interval,
    MeasureSpec,
    Run,
    batch_iou,
    evaluate_all,
    resolve_queries,
    score_matrix,
)
from .rankstats import tau_or_none

ZERO_VARIANCE = 1e-15


# ---------------------------------------------------------------------------
# annotation noise
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseConfig:
    """Rater noise model.

    ``beta2`` is the variance (seconds^2) of each rater's start point.
    ``noiseless`` switches to the deterministic limit: every rater reports
    the exact start and the mean length, so annotations come back unchanged.
    """

    beta2: float
    raters: int = 5
    replicas: int = 100
    seed: int = 0
    noiseless: bool = False

    def __post_init__(self) -> None:
        if self.noiseless:
            if self.beta2 < 0:
                raise InvalidParameter("beta2 must be >= 0")
        elif not self.beta2 > 0:
            raise InvalidParameter(f"beta2 must be > 0, got {self.beta2}")
        if self.raters < 1 or self.raters % 2 == 0:
            raise InvalidParameter(f"raters must be odd and >= 1, got {self.raters}")
        if self.replicas < 1:
            raise InvalidParameter("replicas must be >= 1")


def noise_series(
    beta2s: Sequence[float] = (1, 2, 3, 4), raters: int = 5, replicas: int = 100, seed: int = 0
) -> list[NoiseConfig]:
    return [NoiseConfig(float(b), raters, replicas, seed) for b in beta2s]


def noisy_annotations(
    gt: np.ndarray,
    cfg: NoiseConfig,
    rng: np.random.Generator,
    durations: np.ndarray | None = None,
) -> np.ndarray:
    """Redraw a ``(Q, 2)`` array of annotations through the rater model.

    Each rater draws ``s ~ N(s*, beta2)`` and ``l ~ Exp(mean e* - s*)``; the
    result is the per-coordinate median of ``s`` and ``s + l`` over raters,
    clipped into ``[0, duration]``.
    """
    gt = np.asarray(gt, dtype=float)
    lengths = gt[:, 1] - gt[:, 0]
    if np.any(lengths <= 0):
        raise DegenerateAnnotation("annotations must have positive length")
    shape = (len(gt), cfg.raters)
    z = rng.standard_normal(shape)
    e = rng.standard_exponential(shape)
    if cfg.noiseless:
        z = np.zeros(shape)
        e = np.ones(shape)
    starts = gt[:, 0:1] + math.sqrt(cfg.beta2) * z
    ends = starts + lengths[:, None] * e
    s = np.median(starts, axis=1)
    t = np.median(ends, axis=1)
    upper = np.full(len(gt), np.inf) if durations is None else np.asarray(durations, dtype=float)
    s = np.clip(s, 0.0, upper)
    t = np.clip(t, s, upper)
    return np.stack([s, t], axis=1)


def noisy_annotation(
    interval: Interval,
    cfg: NoiseConfig,
    rng: np.random.Generator,
    duration: float | None = None,
) -> Interval:
    durations = None if duration is None else np.array([duration])
    (s, e), = noisy_annotations(np.array([[interval.start, interval.end]]), cfg, rng, durations)
    return Interval(float(s), float(e))


def _interval_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return batch_iou(a[:, None, :], np.ones(len(a), dtype=np.int64), b)[:, 0]


@dataclass(frozen=True)
class NoiseReport:
    spec: MeasureSpec
    beta2: float
    replicas: int
    rmse_per_system: Mapping[str, float]
    mean_rmse: float
    mean_median_iou: float

    def to_dict(self) -> dict:
        return {
            "measure": self.spec.name,
            "beta2": self.beta2,
            "replicas": self.replicas,
            "mean_rmse": self.mean_rmse,
            "mean_median_iou": self.mean_median_iou,
            "rmse_per_system": dict(self.rmse_per_system),
        }

    def to_row(self) -> dict:
        row = {k: v for k, v in self.to_dict().items() if k != "rmse_per_system"}
        row.update({f"rmse[{k}]": v for k, v in self.rmse_per_system.items()})
        return row


def noise_experiment(
    runs: Sequence[Run],
    gt: GroundTruth,
    specs: Sequence[MeasureSpec],
    configs: Sequence[NoiseConfig],
    query_ids: Sequence[str] | None = None,
) -> list[NoiseReport]:
    """RMSE between original-annotation means and noisy-annotation means.

    Replica ``i`` of every config draws from ``[cfg.seed, i]``; configs that
    share a seed therefore see the same underlying noise, scaled by beta.
    Reports are ordered by config, then spec.
    """
    ids = resolve_queries(gt, query_ids)
    orig_gt = gt.bounds(ids)
    durations = gt.duration_array(ids)
    moments = [r.moment_array(ids) for r in runs]
    original = evaluate_all(runs, gt, specs, ids).mean(axis=2)

    reports = []
    for cfg in configs:
        sq_err = np.zeros((len(specs), len(runs)))
        medians = np.empty(cfg.replicas)
        for rep in range(cfg.replicas):
            rng = np.random.default_rng([cfg.seed, rep])
            noisy = noisy_annotations(orig_gt, cfg, rng, durations)
            medians[rep] = np.median(_interval_iou(orig_gt, noisy))
            for j, (bounds, lengths) in enumerate(moments):
                rel = batch_iou(bounds, lengths, noisy)
                for i, spec in enumerate(specs):
                    diff = score_matrix(rel, lengths, spec).mean() - original[i, j]
                    sq_err[i, j] += diff * diff
        rmse = np.sqrt(sq_err / cfg.replicas)
        for i, spec in enumerate(specs):
            per_system = {r.system_id: float(v) for r, v in zip(runs, rmse[i])}
            reports.append(NoiseReport(
                spec, cfg.beta2, cfg.replicas, per_system,
                float(rmse[i].mean()), float(medians.mean()),
            ))
    return reports


# ---------------------------------------------------------------------------
# subsampling stability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityReport:
    spec: MeasureSpec
    subset_size: int
    trials: int
    tau_mean: float
    tau_variance: float
    dropped: int = 0

    def to_dict(self) -> dict:
        return {
            "measure": self.spec.name,
            "subset_size": self.subset_size,
            "trials": self.trials,
            "tau_mean": self.tau_mean,
            "tau_variance": self.tau_variance,
            "dropped": self.dropped,
        }

    to_row = to_dict


def stability_experiment(
    runs: Sequence[Run],
    gt: GroundTruth,
    specs: Sequence[MeasureSpec],
    subset_sizes: Sequence[int],
    trials: int,
    seed: int = 0,
    query_ids: Sequence[str] | None = None,
) -> list[StabilityReport]:
    """Self-agreement of each measure between disjoint random query subsets.

    Per trial two disjoint subsets of ``size`` queries are drawn, the runs
    are ranked by their mean on each, and tau-b between the two rankings is
    recorded.  The same subset pairs are used for every spec.  Trials where
    tau-b is undefined are dropped and counted.  Variance is the population
    variance over the kept trials.
    """
    ids = resolve_queries(gt, query_ids)
    if trials < 1:
        raise InvalidParameter("trials must be >= 1")
    for size in subset_sizes:
        if size < 1 or 2 * size > len(ids):
            raise InsufficientQueries(
                f"two disjoint subsets of {size} need {2 * size} queries, have {len(ids)}"
            )
    scores = evaluate_all(runs, gt, specs, ids)  # (specs, runs, Q)
    reports = []
    for a, size in enumerate(subset_sizes):
        taus: list[list[float]] = [[] for _ in specs]
        for t in range(trials):
            perm = np.random.default_rng([seed, a, t]).permutation(len(ids))
            first = scores[:, :, perm[:size]].mean(axis=2)
            second = scores[:, :, perm[size : 2 * size]].mean(axis=2)
            for i in range(len(specs)):
                tau = tau_or_none(first[i], second[i])
                if tau is not None:
                    taus[i].append(tau)
        for i, spec in enumerate(specs):
            values = np.array(taus[i])
            kept = len(values)
            reports.append(StabilityReport(
                spec, int(size), trials,
                float(values.mean()) if kept else math.nan,
                float(values.var()) if kept else math.nan,
                trials - kept,
            ))
    return reports


# ---------------------------------------------------------------------------
# model selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SelectionReport:
    validation_specs: tuple[MeasureSpec, ...]
    test_specs: tuple[MeasureSpec, ...]
    chosen: tuple[str, ...]  # one model id per validation spec
    test_scores: tuple[tuple[float, ...], ...]  # chosen x test spec
    z_scores: tuple[tuple[float, ...], ...]  # chosen x test spec
    degenerate: tuple[bool, ...] = field(default=())  # per test spec

    def z_for(self, validation_spec: MeasureSpec | str) -> dict[str, float]:
        names = [s.name for s in self.validation_specs]
        key = validation_spec if isinstance(validation_spec, str) else validation_spec.name
        row = self.z_scores[names.index(key)]
        return {s.name: z for s, z in zip(self.test_specs, row)}

    def to_dict(self) -> dict:
        return {
            "validation_specs": [s.name for s in self.validation_specs],
            "test_specs": [s.name for s in self.test_specs],
            "degenerate": list(self.degenerate),
            "selections": [
                {
                    "validation_spec": v.name,
                    "chosen_model": m,
                    "test_scores": dict(zip((s.name for s in self.test_specs), scores)),
                    "z_scores": dict(zip((s.name for s in self.test_specs), zs)),
                }
                for v, m, scores, zs in zip(
                    self.validation_specs, self.chosen, self.test_scores, self.z_scores
                )
            ],
        }

    def to_rows(self) -> list[dict]:
        rows = []
        for v, m, zs in zip(self.validation_specs, self.chosen, self.z_scores):
            row = {"validation_spec": v.name, "chosen_model": m}
            row.update({s.name: z for s, z in zip(self.test_specs, zs)})
            rows.append(row)
        return rows


def _select(means: np.ndarray, model_ids: Sequence[str]) -> int:
    best = means.max()
    return min((mid, i) for i, (mid, m) in enumerate(zip(model_ids, means)) if m == best)[1]


def model_selection(
    validation_runs: Sequence[Run],
    test_runs: Sequence[Run],
    gt_val: GroundTruth,
    gt_test: GroundTruth,
    validation_specs: Sequence[MeasureSpec],
    test_specs: Sequence[MeasureSpec],
) -> SelectionReport:
    """Pick a model per validation spec, then standardise the picks on test.

    Ties in validation mean go to the lexicographically smallest model id.
    Z-scores are taken across the list of picks (one per validation spec,
    repeats included) using the population standard deviation; a test spec
    where all picks score the same gets zeros and a degenerate flag.
    """
    val_ids = [r.system_id for r in validation_runs]
    test_by_id = {r.system_id: r for r in test_runs}
    if set(val_ids) != set(test_by_id):
        raise InvalidParameter("validation and test runs must cover the same model ids")
    val_means = evaluate_all(validation_runs, gt_val, validation_specs).mean(axis=2)
    chosen = [val_ids[_select(val_means[i], val_ids)] for i in range(len(validation_specs))]

    distinct = sorted(set(chosen))
    test_means = evaluate_all([test_by_id[m] for m in distinct], gt_test, test_specs).mean(axis=2)
    lookup = {m: test_means[:, j] for j, m in enumerate(distinct)}
    scores = np.array([lookup[m] for m in chosen])  # (picks, test specs)

    mu = scores.mean(axis=0)
    sd = scores.std(axis=0)
    degenerate = sd <= ZERO_VARIANCE
    z = np.where(degenerate, 0.0, (scores - mu) / np.where(degenerate, 1.0, sd))
    return SelectionReport(
        tuple(validation_specs),
        tuple(test_specs),
        tuple(chosen),
        tuple(tuple(float(v) for v in row) for row in scores),
        tuple(tuple(float(v) for v in row) for row in z),
        tuple(bool(d) for d in degenerate),
    )
