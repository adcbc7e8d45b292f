import numpy as np
import pytest

from hyperloops import (
    EmptyScoreList,
    InsufficientData,
    RankTooLarge,
    auc,
    evaluate_scores,
    precision_at,
    stratified_folds,
)


class TestAuc:
    def test_perfect_separation(self):
        assert auc([0.9, 0.8], [0.2, 0.1]) == 1.0

    def test_all_ties(self):
        assert auc([0.5], [0.5]) == 0.5

    def test_three_of_four_pairs(self):
        assert auc([0.6, 0.35], [0.4, 0.3]) == 0.75

    def test_partial_ties_count_one_half(self):
        assert auc([1.0, 0.5], [0.5, 0.0]) == 0.875

    def test_empty_lists(self):
        with pytest.raises(EmptyScoreList):
            auc([], [0.1])
        with pytest.raises(EmptyScoreList):
            auc([0.1], [])

    def test_anti_symmetry_is_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            pos = rng.integers(0, 5, size=4).astype(float)
            neg = rng.integers(0, 5, size=8).astype(float)
            assert auc(pos, neg) + auc(neg, pos) == 1.0

    def test_invariant_under_monotone_transforms(self):
        rng = np.random.default_rng(1)
        pos = rng.normal(size=30)
        neg = rng.normal(size=50)
        expected = auc(pos, neg)
        assert auc(np.exp(pos), np.exp(neg)) == expected
        assert auc(3 * pos + 7, 3 * neg + 7) == expected


class TestPrecisionAt:
    def test_perfect_top(self):
        ranked = [("a", 0.9), ("b", 0.8), ("c", 0.1), ("d", 0.0)]
        assert precision_at({"a", "b"}, ranked, 2) == 1.0

    def test_direct_count(self):
        ranked = [("a", 0.9), ("c", 0.8), ("b", 0.1), ("d", 0.0)]
        assert precision_at({"a", "b"}, ranked) == 0.5

    def test_fractional_tie_credit(self):
        ranked = [(i, 0.5) for i in range(12)]
        assert precision_at({0, 5, 11}, ranked, 3) == 0.25

    def test_ties_at_the_cutoff_only(self):
        # 'a' is above the cutoff, two of four tied candidates share one slot
        ranked = [("a", 0.9), ("b", 0.5), ("c", 0.5), ("d", 0.5), ("e", 0.5)]
        assert precision_at({"a", "b", "c"}, ranked, 2) == 0.75

    def test_full_list_is_the_positive_fraction(self):
        ranked = [(i, float(i % 3)) for i in range(10)]
        positives = {1, 4, 9}
        assert precision_at(positives, ranked, len(ranked)) == pytest.approx(0.3)

    def test_rank_too_large(self):
        with pytest.raises(RankTooLarge) as e:
            precision_at({"a"}, [("a", 1.0)], 2)
        assert "L=2" in str(e.value)


def test_evaluate_scores():
    scores = {"a+b": 0.9, "b+c": 0.2, "a+c": 0.4, "c+d": 0.1}
    result = evaluate_scores({"a+b", "b+c"}, scores)
    assert result == (0.75, 0.5)


class TestStratifiedFolds:
    def test_folds_are_stratified_and_deterministic(self):
        labels = [1] * 10 + [-1] * 20
        folds = stratified_folds(labels, 5, seed=3)
        assert len(folds) == 5
        seen = np.concatenate([valid for _, valid in folds])
        assert sorted(seen.tolist()) == list(range(30))
        for train, valid in folds:
            assert (np.asarray(labels)[valid] == 1).sum() == 2
            assert set(train.tolist()).isdisjoint(valid.tolist())

        again = stratified_folds(labels, 5, seed=3)
        for (t1, v1), (t2, v2) in zip(folds, again):
            assert np.array_equal(v1, v2)

    def test_too_few_rows_per_label(self):
        with pytest.raises(InsufficientData):
            stratified_folds([1, 1, -1, -1, -1, -1], 3, seed=0)
