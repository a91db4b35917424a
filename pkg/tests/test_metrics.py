import random

import pytest

from fieldmeta.errors import EmptyEvaluation
from fieldmeta.metrics import accuracy, hit_rate_at_k, hit_rate_detail


def brute_force_accuracy(preds, golds):
    pairs = [(p, g) for p, g in zip(preds, golds) if g is not None]
    return sum(1 for p, g in pairs if p == g) / len(pairs)


def brute_force_hr(rankings, positives, k):
    """Direct top-k set membership count over tables that have positives."""
    used = [(r, p) for r, p in zip(rankings, positives) if p]
    hits = 0
    for ranking, positive in used:
        top = set(ranking[:k])
        if any(x in top for x in positive):
            hits += 1
    return hits / len(used)


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy(["A", "B"], ["A", "B"]) == 1.0

    def test_half(self):
        assert accuracy(["A", "B"], ["A", "C"]) == 0.5

    def test_seven_of_nine(self):
        golds = list("ABCDEFGHI")
        preds = list("ABCDEFGXY")
        assert accuracy(preds, golds) == pytest.approx(7 / 9)
        assert accuracy(preds, golds) == brute_force_accuracy(preds, golds)

    def test_unlabeled_excluded(self):
        assert accuracy(["A", "B", "C"], ["A", None, "X"]) == 0.5

    def test_empty_raises(self):
        with pytest.raises(EmptyEvaluation):
            accuracy(["A"], [None])

    def test_misaligned_raises(self):
        with pytest.raises(EmptyEvaluation):
            accuracy(["A"], ["A", "B"])

    def test_invariant_under_relabeling(self):
        preds = ["a", "b", "a", "c"]
        golds = ["a", "b", "c", "c"]
        mapping = {"a": "x", "b": "y", "c": "z"}
        assert accuracy(preds, golds) == accuracy(
            [mapping[p] for p in preds], [mapping[g] for g in golds]
        )


class TestHitRate:
    def test_positive_always_first(self):
        rankings = [[0, 1, 2]] * 5
        positives = [{0}] * 5
        assert hit_rate_at_k(rankings, positives, 1) == 1.0

    def test_positive_always_second(self):
        rankings = [[0, 1, 2]] * 4
        positives = [{1}] * 4
        assert hit_rate_at_k(rankings, positives, 1) == 0.0
        assert hit_rate_at_k(rankings, positives, 2) == 1.0

    def test_mixed_fixture_matches_oracle(self):
        rankings = [
            [2, 0, 1],
            [1, 2, 0],
            [0, 1, 2],
            [2, 1, 0],
            [1, 0, 2],
            [0, 2, 1],
            [2, 0, 1],
            [1, 2, 0],
            [0, 1, 2],
            [2, 1, 0],
        ]
        positives = [{0}, {1}, {2}, {0, 1}, {2}, {0}, {1}, {2}, {0}, {1}]
        for k in (1, 2, 3):
            assert hit_rate_at_k(rankings, positives, k) == brute_force_hr(
                rankings, positives, k
            )

    def test_tables_without_positives_excluded(self):
        rankings = [[0, 1], [1, 0]]
        positives = [{0}, set()]
        value, used, excluded = hit_rate_detail(rankings, positives, 1)
        assert (value, used, excluded) == (1.0, 1, 1)

    def test_all_excluded_raises(self):
        with pytest.raises(EmptyEvaluation):
            hit_rate_at_k([[0]], [set()], 1)


def test_random_instances_match_brute_force():
    rng = random.Random(1234)
    for _ in range(50):
        n_tables = rng.randint(1, 6)
        rankings = []
        positives = []
        for _ in range(n_tables):
            n_fields = rng.randint(1, 7)
            ranking = list(range(n_fields))
            rng.shuffle(ranking)
            rankings.append(ranking)
            positives.append(
                {i for i in range(n_fields) if rng.random() < 0.4} or {rng.randrange(n_fields)}
            )
        for k in (1, 2, 3):
            assert hit_rate_at_k(rankings, positives, k) == brute_force_hr(
                rankings, positives, k
            )

        n = rng.randint(1, 20)
        golds = [rng.choice("abc") for _ in range(n)]
        preds = [rng.choice("abc") for _ in range(n)]
        assert accuracy(preds, golds) == brute_force_accuracy(preds, golds)


def test_hr_monotone_in_k():
    rng = random.Random(7)
    rankings = []
    positives = []
    for _ in range(20):
        ranking = list(range(8))
        rng.shuffle(ranking)
        rankings.append(ranking)
        positives.append({rng.randrange(8)})
    values = [hit_rate_at_k(rankings, positives, k) for k in range(1, 9)]
    assert all(a <= b for a, b in zip(values, values[1:]))
    assert values[-1] == 1.0  # HR@(#fields) with a positive in every table
