"""Synthetic ground truth and system runs with controllable quality.

Every system starts from one "localised" candidate (the ground truth with
Gaussian boundary jitter) plus looser proposals around the ground truth.
The best-IoU candidate goes to rank 1 with probability ``rank_quality``,
otherwise to a uniformly random lower rank.  Redundant profiles then insert
near-duplicates of the best moment directly below it, never with a higher
IoU, and truncate back to ``list_length``.

Random streams are positional: ground truth uses ``[seed, 0]``, a
profile's base lists use ``[seed, 1, stream]`` and its duplicates
``[seed, 2, stream]``.  Two profiles sharing a ``stream`` and differing only
in ``redundancy`` therefore share every base draw.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidParameter
from .io import DatasetBundle
from .measures import GroundTruth, Interval, Run, batch_iou

DUPLICATE_JITTER = 0.5  # seconds
SWEEP_SEED = 7


@dataclass(frozen=True)
class SystemProfile:
    name: str
    localisation_noise: float
    rank_quality: float
    redundancy: int = 0
    list_length: int = 10
    stream: int | None = None

    def __post_init__(self) -> None:
        if self.list_length < 1:
            raise InvalidParameter("list_length must be >= 1")
        if not 0 <= self.redundancy < self.list_length:
            raise InvalidParameter("redundancy must be in [0, list_length)")
        if self.localisation_noise < 0:
            raise InvalidParameter("localisation_noise must be >= 0")
        if not 0.0 <= self.rank_quality <= 1.0:
            raise InvalidParameter("rank_quality must be in [0, 1]")


@dataclass(frozen=True)
class ScenarioConfig:
    num_queries: int
    video_duration: float
    gt_length: tuple[float, float]
    systems: tuple[SystemProfile, ...]
    seed: int = 0
    query_prefix: str = "q"

    def __post_init__(self) -> None:
        lo, hi = self.gt_length
        if self.num_queries < 2:
            raise InvalidParameter("num_queries must be >= 2")
        if not 0 < lo <= hi:
            raise InvalidParameter("gt_length must satisfy 0 < min <= max")
        if not self.video_duration > hi:
            raise InvalidParameter("video_duration must exceed the max gt length")
        names = [p.name for p in self.systems]
        if len(set(names)) != len(names):
            raise InvalidParameter("system names must be unique")


def _sorted_clip(a: np.ndarray, b: np.ndarray, duration: float):
    lo = np.clip(np.minimum(a, b), 0.0, duration)
    hi = np.clip(np.maximum(a, b), 0.0, duration)
    return lo, hi


def generate_ground_truth(cfg: ScenarioConfig) -> tuple[list[str], np.ndarray]:
    rng = np.random.default_rng([cfg.seed, 0])
    n = cfg.num_queries
    lengths = rng.uniform(*cfg.gt_length, size=n)
    starts = rng.uniform(0.0, 1.0, size=n) * (cfg.video_duration - lengths)
    width = len(str(n - 1))
    ids = [f"{cfg.query_prefix}{i:0{width}d}" for i in range(n)]
    return ids, np.stack([starts, starts + lengths], axis=1)


def generate_lists(
    profile: SystemProfile, gt: np.ndarray, duration: float, seed: int, stream: int
) -> np.ndarray:
    """``(Q, list_length, 2)`` ranked moments for one profile."""
    n, size = len(gt), profile.list_length
    rng = np.random.default_rng([seed, 1, stream])
    s_star, e_star = gt[:, 0], gt[:, 1]
    gt_len = e_star - s_star
    sigma = profile.localisation_noise

    z = rng.standard_normal((n, 2))
    loc_s, loc_e = _sorted_clip(s_star + sigma * z[:, 0], e_star + sigma * z[:, 1], duration)

    # looser proposals: centre offset and log-length spread both widen with sigma
    centre = (s_star + e_star)[:, None] / 2 + (0.5 * gt_len[:, None] + sigma) * rng.standard_normal((n, size - 1))
    length = gt_len[:, None] * np.exp(0.4 * rng.standard_normal((n, size - 1)))
    prop_s, prop_e = _sorted_clip(centre - length / 2, centre + length / 2, duration)

    cand = np.empty((n, size, 2))
    cand[:, 0] = np.stack([loc_s, loc_e], axis=1)
    cand[:, 1:, 0] = prop_s
    cand[:, 1:, 1] = prop_e

    iou = batch_iou(cand, np.full(n, size), gt)
    best = iou.argmax(axis=1)
    top = rng.random(n) < profile.rank_quality
    best_rank = np.where(top, 0, rng.integers(1, max(size, 2), size=n))
    best_rank = np.minimum(best_rank, size - 1)

    # the rest keep a random relative order around the best moment
    keys = rng.random((n, size))
    keys[np.arange(n), best] = np.inf
    others = np.argsort(keys, axis=1, kind="stable")[:, : size - 1]
    slot = np.arange(size - 1)[None, :]
    order = np.empty((n, size), dtype=np.int64)
    np.put_along_axis(order, slot + (slot >= best_rank[:, None]), others, axis=1)
    order[np.arange(n), best_rank] = best
    return np.take_along_axis(cand, order[:, :, None], axis=1)


def add_redundancy(
    lists: np.ndarray, gt: np.ndarray, redundancy: int, duration: float, seed: int, stream: int
) -> np.ndarray:
    """Insert near-duplicates of each list's best moment right below it."""
    if redundancy == 0:
        return lists
    n, size, _ = lists.shape
    rng = np.random.default_rng([seed, 2, stream])
    iou = batch_iou(lists, np.full(n, size), gt)
    pos = iou.argmax(axis=1)
    best = lists[np.arange(n), pos]
    best_iou = iou[np.arange(n), pos]

    jitter = DUPLICATE_JITTER * rng.standard_normal((n, redundancy, 2))
    dup_s, dup_e = _sorted_clip(best[:, None, 0] + jitter[..., 0], best[:, None, 1] + jitter[..., 1], duration)
    dups = np.stack([dup_s, dup_e], axis=2)
    dup_iou = batch_iou(dups, np.full(n, redundancy), gt)
    # a duplicate may not overtake the moment it copies
    dups = np.where((dup_iou > best_iou[:, None])[..., None], best[:, None, :], dups)

    t = np.arange(size)[None, :]
    first = (pos + 1)[:, None]
    from_dup = (t >= first) & (t < first + redundancy)
    src = np.where(t < first, t, t - redundancy)
    kept = np.take_along_axis(lists, np.clip(src, 0, size - 1)[:, :, None], axis=1)
    dup_idx = np.clip(t - first, 0, redundancy - 1)
    copied = np.take_along_axis(dups, dup_idx[:, :, None], axis=1)
    return np.where(from_dup[:, :, None], copied, kept)


def generate_scenario(cfg: ScenarioConfig) -> DatasetBundle:
    ids, gt = generate_ground_truth(cfg)
    entries = {q: Interval(s, e) for q, (s, e) in zip(ids, gt.tolist())}
    durations = dict.fromkeys(ids, float(cfg.video_duration))
    runs = []
    for index, profile in enumerate(cfg.systems):
        stream = index if profile.stream is None else profile.stream
        lists = generate_lists(profile, gt, cfg.video_duration, cfg.seed, stream)
        lists = add_redundancy(lists, gt, profile.redundancy, cfg.video_duration, cfg.seed, stream)
        runs.append(Run.from_arrays(profile.name, ids, lists, np.full(len(ids), profile.list_length)))
    metadata = {
        "generator": "synthetic",
        "seed": str(cfg.seed),
        "num_queries": str(cfg.num_queries),
        "video_duration": repr(float(cfg.video_duration)),
    }
    return DatasetBundle(GroundTruth(entries, durations), tuple(runs), metadata)


# six systems: a strong one, a weaker localiser, a blind-ish baseline, and
# no-NMS style twins of the first two that only add near-duplicates
SCENARIO_PROFILES = (
    SystemProfile("2dtan", 1.0, 0.7, stream=0),
    SystemProfile("2dtan-nonms", 1.0, 0.7, redundancy=3, stream=0),
    SystemProfile("2dtan-rand", 2.5, 0.5, stream=1),
    SystemProfile("2dtan-rand-nonms", 2.5, 0.5, redundancy=3, stream=1),
    SystemProfile("scdm", 1.6, 0.55, stream=2),
    SystemProfile("blind", 5.0, 0.35, stream=3),
)

REDUNDANT_TWINS = (("2dtan-nonms", "2dtan"), ("2dtan-rand-nonms", "2dtan-rand"))

BUNDLED_CONFIG = ScenarioConfig(
    num_queries=500,
    video_duration=30.0,
    gt_length=(3.0, 12.0),
    systems=SCENARIO_PROFILES,
    seed=20230101,
)


def bundled_paper_scenario() -> DatasetBundle:
    """The fixed 500-query, six-system scenario used by the acceptance suite."""
    return generate_scenario(BUNDLED_CONFIG)


def sweep_profiles(n_variants: int = 640) -> list[SystemProfile]:
    """Hyper-parameter style grid of profiles (8 x 8 x 5 x 2 = 640 by default)."""
    noises = np.linspace(0.5, 4.0, 8)
    qualities = np.linspace(0.2, 0.9, 8)
    profiles = []
    for a, noise in enumerate(noises):
        for b, quality in enumerate(qualities):
            for redundancy in range(5):
                for size in (8, 10):
                    idx = len(profiles)
                    profiles.append(SystemProfile(
                        f"model{idx:03d}", float(noise), float(quality),
                        redundancy=redundancy, list_length=size,
                    ))
    if n_variants > len(profiles):
        raise InvalidParameter(f"at most {len(profiles)} variants available")
    return profiles[:n_variants]


def model_sweep(
    n_variants: int = 640,
    val_queries: int = 300,
    test_queries: int = 300,
    seed: int = SWEEP_SEED,
    profiles: Sequence[SystemProfile] | None = None,
) -> tuple[DatasetBundle, DatasetBundle]:
    """Validation and test bundles for the same set of model variants."""
    profiles = list(profiles) if profiles is not None else sweep_profiles(n_variants)
    common = dict(video_duration=30.0, gt_length=(3.0, 12.0), systems=tuple(profiles))
    val = generate_scenario(ScenarioConfig(val_queries, seed=seed, query_prefix="val", **common))
    test = generate_scenario(ScenarioConfig(test_queries, seed=seed + 1, query_prefix="test", **common))
    return val, test


def with_noise(profile: SystemProfile, noise: float) -> SystemProfile:
    return replace(profile, localisation_noise=noise)
