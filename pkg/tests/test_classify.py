import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasefeat.classify import (
    KnnModel,
    compute_metrics,
    confusion_matrix,
    knn_predict,
    one_vs_rest_counts,
    standardize_apply,
    standardize_fit,
    stratified_folds,
    stratified_split,
)

REFERENCE_CM = np.array([[8, 3, 1], [2, 5, 1], [0, 2, 8]])
COHORT_LABELS = np.repeat([1, 2, 3], [43, 36, 32])


# --- splitting ---------------------------------------------------------------


def test_split_43_36_32_cohort():
    train, test = stratified_split(COHORT_LABELS, 10, seed=0)
    assert (len(train), len(test)) == (81, 30)
    assert Counter(COHORT_LABELS[test].tolist()) == {1: 10, 2: 10, 3: 10}
    assert set(train) | set(test) == set(range(111)) and not set(train) & set(test)


def test_split_zero_test():
    train, test = stratified_split(COHORT_LABELS, 0, seed=3)
    assert test.size == 0 and train.size == 111


def test_split_deterministic_and_seeded():
    a = stratified_split(COHORT_LABELS, 10, 7)
    b = stratified_split(COHORT_LABELS, 10, 7)
    c = stratified_split(COHORT_LABELS, 10, 8)
    np.testing.assert_array_equal(a[1], b[1])
    assert not np.array_equal(a[1], c[1])


def test_split_class_too_small():
    with pytest.raises(ValueError, match="class 3"):
        stratified_split(np.repeat([1, 2, 3], [20, 20, 10]), 10, 0)


def test_folds_balanced():
    folds = stratified_folds(COHORT_LABELS, 5, 0)
    assert sorted(np.concatenate(folds).tolist()) == list(range(111))
    for c in (1, 2, 3):
        per_fold = [int(np.sum(COHORT_LABELS[f] == c)) for f in folds]
        assert max(per_fold) - min(per_fold) <= 1


# --- standardization ---------------------------------------------------------


def test_standardize_training_moments():
    rng = np.random.default_rng(0)
    x = rng.normal(5, 3, (40, 6))
    z = standardize_apply(standardize_fit(x), x)
    np.testing.assert_allclose(z.mean(axis=0), 0, atol=1e-10)
    np.testing.assert_allclose(z.std(axis=0), 1, atol=1e-10)


def test_standardize_drops_constant():
    x = np.column_stack([np.arange(5.0), np.full(5, 2.0), np.arange(5.0) ** 2])
    p = standardize_fit(x)
    assert p.dropped == (1,)
    assert standardize_apply(p, x).shape == (5, 2)
    np.testing.assert_allclose(standardize_apply(p, x.mean(axis=0)), 0, atol=1e-12)


def test_standardize_needs_two():
    with pytest.raises(ValueError):
        standardize_fit(np.ones((1, 3)))


# --- knn ---------------------------------------------------------------------


def line_model(labels, k, positions=None):
    pos = np.arange(len(labels), dtype=float) if positions is None else np.asarray(positions, float)
    return KnnModel.fit(pos[:, None], labels, k=k, standardize=False)


def test_knn_k1_exact_point():
    m = line_model([1, 2, 3, 2], 1)
    assert knn_predict(m, [2.0]) == 3


def test_knn_majority():
    m = line_model([1, 1, 1, 2, 3], 5)
    assert knn_predict(m, [0.0]) == 1


def test_knn_vote_tie_by_mean_distance():
    # neighbours {1,1,2,2,3}; class 1 sits closer to the query
    m = line_model([1, 1, 2, 2, 3], 5, [0.1, 0.2, 1.0, 1.1, 0.5])
    assert knn_predict(m, [0.0]) == 1
    m2 = line_model([2, 2, 1, 1, 3], 5, [0.1, 0.2, 1.0, 1.1, 0.5])
    assert knn_predict(m2, [0.0]) == 2


def test_knn_full_tie_lowest_label():
    m = line_model([3, 2], 2, [-1.0, 1.0])
    assert knn_predict(m, [0.0]) == 2


def test_knn_kth_rank_tie_uses_training_order():
    # three points at distance 1; k=2 takes the first two in training order
    m = line_model([3, 3, 1], 2, [1.0, -1.0, 1.0])
    assert knn_predict(m, [0.0]) == 3
    m = line_model([1, 3, 3], 2, [1.0, -1.0, 1.0])
    # neighbours {1, 3} tie on count and distance -> lowest label
    assert knn_predict(m, [0.0]) == 1


def brute_vote(points, labels, q, k):
    d = [abs(p - q) for p in points]
    order = sorted(range(len(points)), key=lambda i: (d[i], i))[:k]
    cnt = Counter(labels[i] for i in order)
    top = max(cnt.values())
    tied = [c for c in cnt if cnt[c] == top]
    mean = {c: sum(d[i] for i in order if labels[i] == c) / cnt[c] for c in tied}
    best = min(mean.values())
    return min(c for c in tied if mean[c] == best)


def test_knn_brute_force_small_instances():
    # every labelling of 5 integer-placed points, several queries
    pos = [0.0, 1.0, 2.0, 4.0, 5.0]
    for labels in itertools.product((1, 2, 3), repeat=5):
        m = line_model(list(labels), 5, pos)
        for q in (0.0, 1.5, 2.5, 3.0, 4.5):
            assert knn_predict(m, [q]) == brute_vote(pos, labels, q, 5)
        m3 = line_model(list(labels), 3, pos)
        for q in (1.0, 3.0):
            assert knn_predict(m3, [q]) == brute_vote(pos, labels, q, 3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_knn_leave_none_out(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((20, 3))
    y = rng.integers(1, 4, 20)
    m = KnnModel.fit(x, y, k=1)
    np.testing.assert_array_equal(m.predict(x), y)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_knn_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((25, 4))
    y = rng.integers(1, 4, 25)
    q = rng.standard_normal((10, 4))
    perm = rng.permutation(25)
    a = KnnModel.fit(x, y, k=5).predict(q)
    b = KnnModel.fit(x[perm], y[perm], k=5).predict(q)
    np.testing.assert_array_equal(a, b)


def test_knn_prestandardized_unchanged():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((30, 3))
    x = (x - x.mean(0)) / x.std(0)
    y = rng.integers(1, 4, 30)
    q = rng.standard_normal((15, 3))
    np.testing.assert_array_equal(
        KnnModel.fit(x, y, 5, standardize=True).predict(q), KnnModel.fit(x, y, 5, standardize=False).predict(q)
    )


def test_knn_dimension_mismatch():
    m = KnnModel.fit(np.random.default_rng(0).standard_normal((10, 3)), np.arange(10) % 3 + 1, k=3)
    with pytest.raises(ValueError, match="dimension"):
        knn_predict(m, np.zeros(4))


def test_knn_k_too_large():
    with pytest.raises(ValueError):
        KnnModel.fit(np.zeros((3, 1)) + np.arange(3)[:, None], [1, 2, 3], k=4)


# --- confusion and metrics ---------------------------------------------------


def test_confusion_examples():
    truth = np.repeat([1, 2, 3], 10)
    np.testing.assert_array_equal(confusion_matrix(truth, truth), np.diag([10, 10, 10]))
    np.testing.assert_array_equal(confusion_matrix([], []), np.zeros((3, 3)))
    # rebuild the reference matrix from (predicted, true) pairs
    pairs = [(p + 1, t + 1) for p in range(3) for t in range(3) for _ in range(REFERENCE_CM[p, t])]
    pred, true = zip(*pairs)
    np.testing.assert_array_equal(confusion_matrix(true, pred), REFERENCE_CM)


def test_confusion_length_mismatch():
    with pytest.raises(ValueError):
        confusion_matrix([1, 2], [1])


def test_metrics_reference_matrix():
    m = compute_metrics(REFERENCE_CM)
    np.testing.assert_array_equal(np.round(100 * m.per_class["PR"], 1), [66.7, 62.5, 80.0])
    np.testing.assert_array_equal(np.round(100 * m.per_class["SE"], 1), [80.0, 50.0, 80.0])
    np.testing.assert_allclose(m.per_class["AC"], [24 / 30, 22 / 30, 26 / 30])
    assert abs(100 * m.macro["AC"] - 80.1) <= 0.2
    assert m.macro["AC"] == pytest.approx(0.8)
    assert m.raw_accuracy == pytest.approx(0.7)
    assert m.undefined == []


def test_metrics_perfect():
    m = compute_metrics(np.diag([10, 10, 10]))
    for name in ("AC", "PR", "SP", "SE"):
        assert m.macro[name] == 1.0
    assert m.raw_accuracy == 1.0


def test_metrics_undefined_excluded():
    # nothing predicted as class 3: its precision is undefined
    m = compute_metrics([[5, 1, 2], [0, 4, 3], [0, 0, 0]])
    assert np.isnan(m.per_class["PR"][2])
    assert ("PR", 3) in m.undefined
    assert m.macro["PR"] == pytest.approx(np.mean([5 / 8, 4 / 7]))
    assert m.to_dict()["per_class"]["PR"]["NORMAL"] is None


@pytest.mark.parametrize("cm", [np.zeros((3, 3)), np.ones((2, 2)), [[1, -1, 0], [0, 1, 0], [0, 0, 1]],
                                [[1.5, 0, 0], [0, 1, 0], [0, 0, 1]]])
def test_metrics_rejects(cm):
    with pytest.raises(ValueError):
        compute_metrics(cm)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=9, max_size=9).filter(lambda v: sum(v) > 0))
def test_metric_identities_exact(cells):
    cm = np.array(cells).reshape(3, 3)
    m = compute_metrics(cm)
    c = one_vs_rest_counts(cm)
    for i in range(3):
        tp, tn, fp, fn = (int(c[k][i]) for k in ("TP", "TN", "FP", "FN"))
        assert tp + tn + fp + fn == cm.sum()
        if tp + fn:
            assert Fraction(m.per_class["SE"][i]).limit_denominator(10_000) * (tp + fn) == tp
        if tn + fp:
            assert Fraction(m.per_class["SP"][i]).limit_denominator(10_000) * (tn + fp) == tn
    vals = np.concatenate([v[~np.isnan(v)] for v in m.per_class.values()])
    assert np.all((vals >= 0) & (vals <= 1))
    # columns are the true classes
    np.testing.assert_array_equal(cm.sum(axis=0), c["TP"] + c["FN"])
