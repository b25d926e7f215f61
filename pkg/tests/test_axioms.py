import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axiou.axioms import (
    EXPECTED,
    Axiom,
    AxiomVerdict,
    Perturbation,
    PerturbationKind,
    check_axiom,
    generate_perturbation,
    satisfaction_matrix,
)
from axiou.errors import Infeasible, InvalidParameter
from axiou.measures import Family, MeasureSpec, axiou_at, recall_at

NB, BEST = PerturbationKind.NON_BEST, PerturbationKind.BEST
scores_st = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=10)


class TestPerturbation:
    def test_non_best_only_rank_two(self):
        p = generate_perturbation([0.9, 0.1], NB, 0)
        assert p.rank == 2
        assert 0.1 < p.replacement <= 0.9

    def test_best_rank_one_of_singleton(self):
        p = generate_perturbation([0.3], BEST, 0)
        assert p.rank == 1 and p.prefix_max is None
        assert 0.3 < p.replacement <= 1.0

    def test_best_at_rank_three_above_prefix(self):
        for seed in range(50):
            p = generate_perturbation([0.2, 0.2, 0.2], BEST, seed)
            if p.rank == 3:
                assert 0.2 < p.replacement <= 1.0
                break
        else:
            pytest.fail("rank 3 never drawn")

    def test_non_best_infeasible(self):
        with pytest.raises(Infeasible):
            generate_perturbation([0.1, 0.5, 0.9], NB, 0)  # increasing: nothing below a prefix max

    def test_empty_infeasible(self):
        with pytest.raises(Infeasible):
            generate_perturbation([], BEST, 0)

    def test_best_infeasible_when_top_is_one(self):
        with pytest.raises(Infeasible):
            generate_perturbation([1.0, 1.0], BEST, 0)

    def test_deterministic(self):
        a = generate_perturbation([0.5, 0.2, 0.4, 0.1], NB, 42)
        b = generate_perturbation([0.5, 0.2, 0.4, 0.1], NB, 42)
        assert a == b

    def test_construction_checks_conditions(self):
        with pytest.raises(InvalidParameter):
            Perturbation("q", 2, 0.5, 0.4, NB, 0.9)  # r' < r
        with pytest.raises(InvalidParameter):
            Perturbation("q", 2, 0.1, 0.95, NB, 0.9)  # r' above prefix max
        with pytest.raises(InvalidParameter):
            Perturbation("q", 1, 0.1, 0.5, NB, None)  # non-best needs k > 1
        with pytest.raises(InvalidParameter):
            Perturbation("q", 2, 0.1, 0.5, BEST, 0.9)  # best must beat prefix

    def test_floor_and_ceiling(self):
        p = generate_perturbation([0.2, 0.9, 0.1], BEST, 0, ceiling=0.5)
        assert p.replacement <= 0.5
        q = generate_perturbation([0.9, 0.1, 0.6], NB, 1, floor=0.5)
        assert q.original <= 0.5 < q.replacement

    @given(scores_st, st.sampled_from([NB, BEST]), st.integers(0, 2**32 - 1))
    def test_conditions_hold(self, scores, kind, seed):
        try:
            p = generate_perturbation(scores, kind, seed)
        except Infeasible:
            return
        k = p.rank
        assert scores[k - 1] == p.original < p.replacement
        prefix = scores[: k - 1]
        if kind is NB:
            assert k > 1 and p.replacement <= max(prefix)
        else:
            assert k == 1 or p.replacement > max(prefix)
        changed = p.apply(scores)
        assert [i for i, (a, b) in enumerate(zip(scores, changed)) if a != b] == [k - 1]

    @given(scores_st, st.integers(0, 2**32 - 1), st.integers(1, 10))
    def test_scalar_axiou_obeys_both_axioms(self, scores, seed, k):
        for kind in (NB, BEST):
            try:
                p = generate_perturbation(scores, kind, seed, max_rank=k)
            except Infeasible:
                continue
            before, after = axiou_at(scores, k), axiou_at(p.apply(scores), k)
            if kind is NB:
                assert abs(after - before) <= 1e-12
            else:
                old_best = max(p.original, p.prefix_max if p.prefix_max is not None else 0.0)
                gap = p.replacement - old_best
                assert after - before >= gap / k - 1e-12


class TestCheckAxiom:
    def test_axiou_inv(self):
        v = check_axiom(MeasureSpec.parse("axiou@5"), Axiom.INV_K, 1000, 1)
        assert v.violations == 0 and v.witness is None

    def test_axiou_mon(self):
        v = check_axiom(MeasureSpec.parse("axiou@5"), Axiom.MON_K, 1000, 2)
        assert v.violations == 0

    def test_recall_mon_witness_same_side(self):
        v = check_axiom(MeasureSpec.parse("recall@5:0.5"), Axiom.MON_K, 1000, 3)
        assert v.violations > 0
        p = v.witness["perturbation"]
        assert (p["original"] > 0.5) == (p["replacement"] > 0.5)
        assert v.witness["perturbed_mean"] <= v.witness["original_mean"]

    def test_inv_at_k1_all_skipped(self):
        v = check_axiom(MeasureSpec.parse("recall@1:0.5"), Axiom.INV_K, 50, 0)
        assert v.skipped == 50 and v.violations == 0 and v.satisfied

    def test_trials_positive(self):
        with pytest.raises(InvalidParameter):
            check_axiom(MeasureSpec.parse("axiou@5"), Axiom.INV_K, 0)

    def test_deterministic(self):
        spec = MeasureSpec.parse("ap@5:0.5")
        assert check_axiom(spec, Axiom.INV_K, 200, 9) == check_axiom(spec, Axiom.INV_K, 200, 9)

    def test_verdict_invariants(self):
        spec = MeasureSpec.parse("axiou@5")
        with pytest.raises(InvalidParameter):
            AxiomVerdict(spec, Axiom.INV_K, 3, 4, 0, {"x": 1})
        with pytest.raises(InvalidParameter):
            AxiomVerdict(spec, Axiom.INV_K, 3, 1, 0, None)


class TestSatisfactionMatrix:
    @pytest.mark.parametrize("k,theta", [(2, 0.5), (3, 0.1), (10, 0.9)])
    def test_pattern_other_settings(self, k, theta):
        m = satisfaction_matrix(k, theta, 2000, seed=5)
        assert m.matches_expected(), m.to_rows()

    def test_k1(self):
        m = satisfaction_matrix(1, 0.5, 2000, seed=0)
        assert m.cell(Family.RECALL, Axiom.INV_K).skipped == 2000
        assert m.cell(Family.RECALL, Axiom.INV_K).satisfied
        assert not m.unexpected_violations()

    def test_report_shapes(self):
        m = satisfaction_matrix(5, 0.5, 50, seed=0)
        rows = m.to_rows()
        assert len(rows) == 8
        assert {(r["measure"].split("@")[0], r["axiom"]) for r in rows} == {
            (f.value, a.value) for f, a in EXPECTED
        }
        assert m.to_dict()["cells"][0]["expected_satisfied"] is True


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_recall_inv_holds_for_any_seed(seed):
    v = check_axiom(MeasureSpec.parse("recall@4:0.3"), Axiom.INV_K, 20, seed)
    assert v.violations == 0


def test_recall_scalar_inv_example():
    # raising a dominated score never changes the best of the top k
    scores = [0.8, 0.1, 0.3]
    p = generate_perturbation(scores, NB, np.random.default_rng(0))
    assert recall_at(p.apply(scores), 3, 0.5) == recall_at(scores, 3, 0.5)
