"""Acceptance criteria 1-9.

Each test carries a ``criterion`` marker; conftest prints one PASS/FAIL line
per criterion at the end of the session.  Run directly with
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import random
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from axiou.axioms import Axiom, satisfaction_matrix
from axiou.cli import DEFAULT_MEASURES, main
from axiou.experiments import noise_experiment, noise_series, stability_experiment
from axiou.measures import (
    Family,
    GroundTruth,
    Interval,
    Run,
    mean_measure,
    parse_specs,
    recall_at,
    relevance_matrix,
)
from axiou.rankstats import pair_counts, tau_or_none
from axiou.synth import REDUNDANT_TWINS
from axiou.theory import monte_carlo_sweep, theory_sweep

criterion = pytest.mark.criterion

GRID = (0.3, 0.5, 0.7)
GAMMAS = (0.05, 0.1, 0.2)
BETA2 = (1.0, 2.0, 3.0, 4.0)
SIZES = (25, 50, 100, 200)


def _timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


def _inversions(values) -> int:
    return sum(b < a for a, b in zip(values, values[1:]))


# 1 -------------------------------------------------------------------------

C1 = "axiom satisfaction matrix at K=5, theta=0.5"


@pytest.fixture(scope="module")
def axiom_matrix():
    return _timed(satisfaction_matrix, 5, 0.5, 2000, seed=0)


@criterion(1, C1)
class TestAxiomMatrix:
    @pytest.mark.parametrize(
        "family,axiom,holds",
        [
            (Family.AXIOU, Axiom.INV_K, True),
            (Family.AXIOU, Axiom.MON_K, True),
            (Family.RECALL, Axiom.INV_K, True),
            (Family.RECALL, Axiom.MON_K, False),
            (Family.AP, Axiom.INV_K, False),
            (Family.AP, Axiom.MON_K, False),
            (Family.DCG, Axiom.INV_K, False),
            (Family.DCG, Axiom.MON_K, True),
        ],
    )
    def test_cell(self, axiom_matrix, family, axiom, holds):
        cell = axiom_matrix[0].cell(family, axiom)
        assert cell.trials == 2000
        if holds:
            assert cell.violations == 0
        else:
            assert cell.violations >= 1 and cell.witness is not None

    def test_runtime(self, axiom_matrix):
        assert axiom_matrix[1] < 10.0


# 2 -------------------------------------------------------------------------

C2 = "integrating R over theta and averaging over k gives AxIoU"


def _random_run(rng, n_queries=20, max_len=12):
    gt, lists = {}, {}
    for i in range(n_queries):
        s = rng.uniform(0, 20)
        gt[f"q{i}"] = Interval(s, s + rng.uniform(0.5, 10))
        starts = rng.uniform(0, 25, size=int(rng.integers(0, max_len + 1)))
        lists[f"q{i}"] = [(a, a + rng.uniform(0, 10)) for a in starts]
    return GroundTruth(gt), Run.from_moments("sys", lists)


def _theta_integral(scores, k) -> float:
    # R@k,theta is a step function of theta: integrate it exactly between breakpoints
    cuts = sorted({0.0, 1.0, *scores[:k]})
    return math.fsum((b - a) * recall_at(scores, k, (a + b) / 2) for a, b in zip(cuts, cuts[1:]))


@criterion(2, C2)
@pytest.mark.parametrize("K", [1, 5, 10])
def test_marginalisation(K):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        gt, run = _random_run(rng)
        rel, lengths = relevance_matrix(run, gt, gt.query_ids)
        rows = [rel[i, : lengths[i]].tolist() for i in range(len(lengths))]
        lhs = math.fsum(
            math.fsum(_theta_integral(row, k) for row in rows) / len(rows) for k in range(1, K + 1)
        ) / K
        rhs = mean_measure(run, gt, parse_specs(f"axiou@{K}")[0]).mean
        worst = max(worst, abs(lhs - rhs))
    assert worst <= 1e-12


# 3 -------------------------------------------------------------------------

C3 = "worked example [0.69, 0.71]"


@criterion(3, C3)
def test_worked_example():
    assert recall_at([0.69, 0.71], 1, 0.7) == 0
    assert recall_at([0.69, 0.71], 2, 0.7) == 1


# 4 -------------------------------------------------------------------------

C4 = "closed-form bias and variance agree with Monte Carlo"


@pytest.fixture(scope="module")
def cross_checks():
    return _timed(monte_carlo_sweep, GRID, GRID, GAMMAS, samples=1_000_000, seed=0)


@criterion(4, C4)
class TestTheory:
    def test_within_three_se(self, cross_checks):
        checks, _ = cross_checks
        assert len(checks) == 3 * 3 * (1 + 3)
        bad = [
            (c.theory.measure, c.theory.r, c.theory.theta, c.theory.gamma, c.bias_z, c.variance_z)
            for c in checks
            if not c.agrees(3.0)
        ]
        assert not bad

    @pytest.mark.parametrize("gamma", GAMMAS)
    def test_mse_peak_at_half(self, gamma):
        thetas = [i / 100 for i in range(5, 96, 5)]
        rows = [p for p in theory_sweep(0.5, thetas, [gamma]) if p.measure == "recall@1"]
        assert max(rows, key=lambda p: p.mse).theta == 0.5
        grid_rows = [p for p in theory_sweep(0.5, GRID, [gamma]) if p.measure == "recall@1"]
        assert max(grid_rows, key=lambda p: p.mse).theta == 0.5

    def test_runtime(self, cross_checks):
        assert cross_checks[1] < 30.0


# 5 -------------------------------------------------------------------------

C5 = "noise robustness ordering on the bundled scenario"
NOISE_SPECS = parse_specs(DEFAULT_MEASURES)


@pytest.fixture(scope="module")
def noise_reports(bundled):
    reports, seconds = _timed(
        noise_experiment, bundled.runs, bundled.gt, NOISE_SPECS, noise_series(BETA2, replicas=100)
    )
    table = {(r.spec.name, r.beta2): r.mean_rmse for r in reports}
    return table, seconds


@criterion(5, C5)
class TestNoise:
    @pytest.mark.parametrize("K", [5, 10])
    def test_recall_07_above_axiou(self, noise_reports, K):
        table = noise_reports[0]
        for b in BETA2:
            assert table[(f"recall@{K}:0.7", b)] > table[(f"axiou@{K}", b)], b

    def test_rmse_nondecreasing_in_beta2(self, noise_reports):
        table = noise_reports[0]
        offenders = {}
        for spec in NOISE_SPECS:
            series = [table[(spec.name, b)] for b in BETA2]
            if _inversions(series) > 1:
                offenders[spec.name] = [round(v, 4) for v in series]
        assert not offenders, f"more than one inversion: {offenders}"

    def test_runtime(self, noise_reports):
        assert noise_reports[1] < 120.0


# 6 -------------------------------------------------------------------------

C6 = "stability ordering on the bundled scenario"
STABILITY_SPECS = parse_specs(DEFAULT_MEASURES)


@pytest.fixture(scope="module")
def stability_reports(bundled):
    reports, seconds = _timed(
        stability_experiment, bundled.runs, bundled.gt, STABILITY_SPECS, SIZES, 1000, seed=0
    )
    table = {(r.spec.name, r.subset_size): r for r in reports}
    return table, seconds


@criterion(6, C6)
class TestStability:
    def test_axiou_at_most_recall(self, stability_reports):
        table = stability_reports[0]
        for size in SIZES:
            assert table[("axiou@10", size)].tau_variance <= table[("recall@10:0.5", size)].tau_variance, size

    def test_variance_nonincreasing_in_size(self, stability_reports):
        table = stability_reports[0]
        offenders = {}
        for spec in STABILITY_SPECS:
            series = [table[(spec.name, s)].tau_variance for s in SIZES]
            if _inversions([-v for v in series]) > 1:
                offenders[spec.name] = series
        assert not offenders, f"more than one inversion: {offenders}"

    def test_runtime(self, stability_reports):
        assert stability_reports[1] < 120.0


# 7 -------------------------------------------------------------------------

C7 = "redundant twin matches its clean twin except under AP"


@criterion(7, C7)
@pytest.mark.parametrize("dup,clean", REDUNDANT_TWINS)
def test_redundancy_twins(bundled, dup, clean):
    def mean(system, text):
        return mean_measure(bundled.run(system), bundled.gt, parse_specs(text)[0]).mean

    for k in (1, 5, 10):
        assert abs(mean(dup, f"axiou@{k}") - mean(clean, f"axiou@{k}")) <= 1e-12
        for t in (0.3, 0.5, 0.7):
            assert abs(mean(dup, f"recall@{k}:{t}") - mean(clean, f"recall@{k}:{t}")) <= 1e-12
    assert any(mean(dup, f"ap@{k}:{t}") != mean(clean, f"ap@{k}:{t}") for k in (5, 10) for t in GRID)


# 8 -------------------------------------------------------------------------

C8 = "Kendall tau-b equals brute-force pair enumeration"


def _brute_tau_b(x, y):
    n = len(x)
    conc = disc = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy = x[i] - x[j], y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                tx += 1
            elif dy == 0:
                ty += 1
            elif (dx > 0) == (dy > 0):
                conc += 1
            else:
                disc += 1
    denom = (conc + disc + tx) * (conc + disc + ty)
    return (conc, disc, tx, ty), (None if denom == 0 else (conc - disc) / math.sqrt(denom))


@criterion(8, C8)
def test_tau_b_brute_force():
    rnd = random.Random(8)
    for _ in range(1000):
        n = rnd.randint(2, 8)
        x = [rnd.randint(0, 3) for _ in range(n)]
        y = [rnd.randint(0, 3) for _ in range(n)]
        counts, expected = _brute_tau_b(x, y)
        assert pair_counts(x, y) == counts
        assert tau_or_none(x, y) == expected


# 9 -------------------------------------------------------------------------

C9 = "every CLI command is byte-identical on re-run"

CLI_COMMANDS = {
    "eval": ["eval", "--measures", "axiou@5,recall@5:0.5,ap@5:0.5,dcg@5", "--per-query"],
    "axioms": ["axioms", "--trials", "100"],
    "agreement": ["agreement"],
    "stability": ["stability", "--sizes", "25,50", "--trials", "20"],
    "noise": ["noise", "--replicas", "3", "--measures", "axiou@5,recall@5:0.7"],
    "select": ["select", "--variants", "16"],
    "theory": ["theory", "--r", "0.3,0.7", "--monte-carlo", "--samples", "5000"],
}


@criterion(9, C9)
class TestDeterminism:
    @pytest.mark.parametrize("name", sorted(CLI_COMMANDS))
    @pytest.mark.parametrize("fmt", ["json", "csv"])
    def test_report_commands(self, tmp_path, name, fmt):
        outputs = []
        for attempt in ("a", "b"):
            path = tmp_path / f"{attempt}.{fmt}"
            assert main([*CLI_COMMANDS[name], "--seed", "11", "--out", str(path)]) == 0
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1] and outputs[0]

    def test_synth(self, tmp_path):
        trees = []
        for attempt in ("a", "b"):
            root = tmp_path / attempt
            assert main(["synth", "--out-dir", str(root), "--queries", "60", "--seed", "11"]) == 0
            trees.append({p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()})
        assert trees[0] == trees[1] and len(trees[0]) == 8


if __name__ == "__main__":
    sys.exit(pytest.main([str(Path(__file__)), "-v", "-p", "no:cacheprovider"]))
