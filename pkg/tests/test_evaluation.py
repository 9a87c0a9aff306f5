import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from latentseq import SETTINGS, DegenerateInputError, DiscreteSequence, JumpMatrix, ValidationError
from latentseq.evaluation import (
    EvalReport,
    classification_report,
    estimate_transition_matrix,
    evaluate_assignments,
    frobenius,
    greedy_assign,
    relabel,
    transition_counts,
)
from latentseq.markov_sim import simulate_jump_chain

UNIFORM = 0.25 * (np.ones((5, 5)) - np.eye(5))


class TestEstimate:
    def test_alternating_sequence(self):
        est = estimate_transition_matrix([DiscreteSequence("x", [1, 2, 1, 2, 1])], n_states=5)
        np.testing.assert_array_equal(est.probs[0], [0, 1, 0, 0, 0])
        np.testing.assert_array_equal(est.probs[1], [1, 0, 0, 0, 0])
        np.testing.assert_array_equal(est.probs[2:], UNIFORM[2:])
        assert est.flagged_rows == (3, 4, 5)

    def test_self_pairs_are_ignored(self):
        counts = transition_counts([np.array([1, 1, 2, 2, 2, 1])], 2)
        np.testing.assert_array_equal(counts, [[0, 1], [1, 0]])

    def test_consistency_on_long_chain(self):
        L3 = SETTINGS[1].matrices[2]
        chain = simulate_jump_chain(L3, None, 100_000, seed=5)
        est = estimate_transition_matrix([chain], n_states=5)
        assert np.abs(est.probs - L3.probs).max() <= 0.02
        assert est.flagged_rows == ()

    def test_constant_sequences_are_degenerate(self):
        with pytest.raises(DegenerateInputError):
            estimate_transition_matrix([np.array([2, 2, 2]), np.array([4, 4])], n_states=5)
        est = estimate_transition_matrix([np.array([2, 2])], n_states=5, allow_degenerate=True)
        np.testing.assert_array_equal(est.probs, UNIFORM)

    def test_pools_sequences(self):
        est = estimate_transition_matrix([np.array([1, 2]), np.array([1, 3])], n_states=3)
        np.testing.assert_array_equal(est.probs[0], [0, 0.5, 0.5])


class TestFrobenius:
    def test_examples(self):
        A = JumpMatrix(UNIFORM)
        B = UNIFORM.copy()
        B[0, 1] += 0.1
        B[0, 2] -= 0.1
        assert frobenius(A, A) == 0
        assert frobenius(A, B) == pytest.approx(np.sqrt(0.02), abs=1e-15)
        assert frobenius(A, B) == frobenius(B, A)
        with pytest.raises(ValidationError):
            frobenius(np.zeros((2, 2)), np.zeros((3, 3)))


class TestRelabel:
    def test_identity_and_swap(self):
        truth = list(SETTINGS[1].matrices)
        assert relabel(truth, truth).tolist() == [1, 2, 3]
        assert relabel([truth[1], truth[0], truth[2]], truth).tolist() == [2, 1, 3]

    @pytest.mark.parametrize("perm", list(itertools.permutations(range(3))))
    def test_every_permutation(self, perm):
        truth = list(SETTINGS[1].matrices)
        estimated = [truth[j] for j in perm]
        assert relabel(estimated, truth).tolist() == [j + 1 for j in perm]

    def test_greedy_differs_from_optimal(self):
        F = np.array([[1.0, 1.1, 9.0], [1.1, 9.0, 9.0], [9.0, 9.0, 1.2]])
        # trace: (0,0)=1.0 fixed first; then (2,2)=1.2; row 1 is left with column 1
        assert greedy_assign(F).tolist() == [0, 1, 2]
        assert F[[0, 1, 2], [0, 1, 2]].sum() == pytest.approx(11.2)
        # the optimal matching pairs rows 0 and 1 crosswise for a total of 3.4
        best = min(itertools.permutations(range(3)), key=lambda p: F[[0, 1, 2], list(p)].sum())
        assert list(best) == [1, 0, 2] and F[[0, 1, 2], list(best)].sum() == pytest.approx(3.4)

    def test_hungarian_option(self):
        truth = list(SETTINGS[4].matrices)
        assert relabel(truth[::-1], truth, method="hungarian").tolist() == [3, 2, 1]
        with pytest.raises(ValidationError):
            relabel(truth, truth, method="auction")
        with pytest.raises(ValidationError):
            relabel(truth[:2], truth)

    def test_ties_go_low(self):
        assert greedy_assign(np.ones((3, 3))).tolist() == [0, 1, 2]

    @given(st.permutations([0, 1, 2]), st.integers(0, 500))
    def test_common_permutation_composes(self, perm, seed):
        rng = np.random.default_rng(seed)
        truth = [rng.dirichlet(np.ones(4), size=4) for _ in range(3)]
        estimated = [rng.dirichlet(np.ones(4), size=4) for _ in range(3)]
        tau = relabel(estimated, truth) - 1
        perm = np.array(perm)
        tau_p = relabel([estimated[i] for i in perm], [truth[i] for i in perm]) - 1
        # estimated slot l of the permuted problem is original perm[l]; truth slot j is original perm[j]
        np.testing.assert_array_equal(perm[tau_p], tau[perm])


class TestReport:
    def test_hand_example(self):
        r = classification_report([1, 1, 2, 2], [1, 2, 2, 2], [1, 2])
        assert (r.precision[0], r.recall[0], r.accuracy[0], r.size_ratio[0]) == (1.0, 0.5, 0.75, 0.5)
        assert (r.recall[1], r.accuracy[1], r.size_ratio[1]) == (1.0, 0.75, 1.5)
        assert r.precision[1] == 2 / 3
        assert r.confusion.tolist() == [[1, 1], [0, 2]]

    def test_relabeling_is_applied(self):
        r = classification_report([1, 1, 2, 2], [2, 1, 1, 1], [2, 1])
        assert r.precision.tolist() == [1.0, 2 / 3]

    def test_perfect(self):
        Z = [1, 2, 3, 3, 2, 1]
        r = classification_report(Z, Z, [1, 2, 3])
        for m in ("precision", "recall", "accuracy", "size_ratio"):
            assert r.metric(m).tolist() == [1.0, 1.0, 1.0]

    def test_all_wrong_binary(self):
        r = classification_report([1, 1, 2, 2], [2, 2, 1, 1], [1, 2])
        assert r.precision.tolist() == [0, 0] and r.recall.tolist() == [0, 0] and r.accuracy.tolist() == [0, 0]

    def test_empty_prediction_and_true_class(self):
        r = classification_report([1, 1, 1], [1, 1, 1], [1, 2], K=2)
        assert r.precision[1] == 0.0 and np.isnan(r.recall[1]) and np.isnan(r.size_ratio[1])

    def test_errors(self):
        with pytest.raises(ValidationError):
            classification_report([1, 2], [1, 3], [1, 2])
        with pytest.raises(ValidationError):
            classification_report([1, 2], [1], [1, 2])
        with pytest.raises(ValidationError):
            classification_report([1, 2], [1, 2], [1, 1])
        with pytest.raises(KeyError):
            classification_report([1], [1], [1]).metric("f1")

    @given(st.lists(st.tuples(st.integers(1, 3), st.integers(1, 3)), min_size=1, max_size=60),
           st.permutations([1, 2, 3]))
    def test_identities(self, pairs, tau):
        Z, Zhat = map(np.array, zip(*pairs))
        r = classification_report(Z, Zhat, tau, K=3)
        mapped = np.array(tau)[Zhat - 1]
        tp = np.diag(r.confusion)
        assert tp.sum() == (mapped == Z).sum()
        assert r.confusion.sum() == Z.size
        assert r.confusion.sum(axis=1).tolist() == np.bincount(Z, minlength=4)[1:].tolist()
        for m in ("precision", "accuracy"):
            assert np.all((r.metric(m) >= 0) & (r.metric(m) <= 1))

    @given(st.lists(st.tuples(st.integers(1, 2), st.integers(1, 2)), min_size=1, max_size=40))
    def test_binary_accuracy_is_shared(self, pairs):
        Z, Zhat = map(np.array, zip(*pairs))
        r = classification_report(Z, Zhat, [1, 2])
        assert r.accuracy[0] == r.accuracy[1]

    def test_symmetric_errors_equal_sizes(self):
        # equal class sizes and one error each way: recall_1 == precision_1
        r = classification_report([1, 1, 1, 2, 2, 2], [1, 1, 2, 2, 2, 1], [1, 2])
        assert r.recall[0] == r.precision[0] == 2 / 3

    def test_report_equality_and_dict(self):
        a = classification_report([1, 1, 1], [1, 1, 1], [1, 2], K=2)
        b = classification_report([1, 1, 1], [1, 1, 1], [1, 2], K=2)
        assert a == b
        d = a.to_dict()
        assert d["relabeling"] == [1, 2] and d["per_class"][0]["precision"] == 1.0
        assert isinstance(a, EvalReport)


def test_evaluate_assignments_relabels_swapped_clusters():
    from latentseq import simulate_cohort

    cohort = simulate_cohort(SETTINGS[1], [60, 60, 60], 44, seed=2)
    Z = np.array([s.true_class for s in cohort])
    swapped = np.array([2, 3, 1])[Z - 1]
    report = evaluate_assignments(cohort, swapped, SETTINGS[1].matrices)
    assert report.relabeling == (3, 1, 2)
    for m in ("precision", "recall", "accuracy", "size_ratio"):
        assert report.metric(m).tolist() == [1.0, 1.0, 1.0]
