import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from uqens.metrics import BinStat, brier, compute_bins, ece, full_report, mce, qwk
from helpers import random_prediction_set


def random_instance(rng, max_n=500, max_classes=7, max_bins=15):
    n = int(rng.integers(1, max_n + 1))
    c = int(rng.integers(2, max_classes + 1))
    m = int(rng.integers(1, max_bins + 1))
    probs = rng.dirichlet(np.ones(c), size=n)
    labels = rng.integers(0, c, size=n)
    return probs, labels, m


class TestComputeBins:
    def test_two_samples_two_bins(self):
        probs = [[0.3, 0.3, 0.3, 0.1], [0.9, 0.05, 0.025, 0.025]]
        bins = compute_bins(probs, [0, 0], num_bins=2)
        assert [b.count for b in bins] == [1, 1]

    def test_single_correct_sample_single_bin(self):
        bins = compute_bins([[0.2, 0.8]], [1], num_bins=1)
        assert len(bins) == 1
        assert bins[0].count == 1
        assert bins[0].accuracy == 1.0

    def test_confidence_one_lands_in_last_bin(self):
        bins = compute_bins([[0.0, 1.0]], [1], num_bins=10)
        assert bins[-1].count == 1

    def test_empty_bins_retained_as_zero(self):
        bins = compute_bins([[0.05, 0.95]], [1], num_bins=10)
        for b in bins[:-1]:
            assert (b.count, b.accuracy, b.confidence) == (0, 0.0, 0.0)

    def test_matches_bruteforce_on_random_simplexes(self):
        rng = np.random.default_rng(7)
        probs = rng.dirichlet(np.ones(5), size=20)
        labels = rng.integers(0, 5, size=20)
        got = compute_bins(probs, labels, num_bins=10)
        want = oracles.bin_stats(probs.tolist(), labels.tolist(), 10)
        for b, (m, lo, hi, count, acc, conf) in zip(got, want):
            assert b.bin_index == m
            assert b.count == count
            assert b.accuracy == pytest.approx(acc, abs=1e-12)
            assert b.confidence == pytest.approx(conf, abs=1e-12)

    def test_rejects_empty_input(self):
        with pytest.raises(ValueError, match="no samples"):
            compute_bins(np.empty((0, 3)), [], num_bins=5)


class TestEce:
    def test_perfectly_confident_and_correct(self):
        bins = compute_bins([[0.0, 1.0], [1.0, 0.0]], [1, 0], num_bins=10)
        assert ece(bins, 2) == 0.0

    def test_single_bin_hand_value(self):
        bins = [BinStat(1, 0.0, 1.0, 4, 0.5, 0.9)]
        assert ece(bins, 4) == pytest.approx(0.4, abs=1e-12)

    def test_two_bin_hand_value(self):
        bins = [
            BinStat(1, 0.0, 0.5, 2, 1.0, 0.8),
            BinStat(2, 0.5, 1.0, 2, 0.0, 0.6),
        ]
        assert ece(bins, 4) == pytest.approx(0.4, abs=1e-12)

    def test_zero_samples_rejected(self):
        with pytest.raises(ValueError):
            ece([], 0)


class TestMce:
    def test_two_bin_hand_value(self):
        bins = [
            BinStat(1, 0.0, 0.5, 2, 1.0, 0.8),
            BinStat(2, 0.5, 1.0, 2, 0.0, 0.6),
        ]
        assert mce(bins) == pytest.approx(0.6, abs=1e-12)

    def test_perfect_calibration(self):
        bins = compute_bins([[0.0, 1.0], [1.0, 0.0]], [1, 0], num_bins=5)
        assert mce(bins) == 0.0

    def test_single_bin_equals_ece(self):
        bins = [BinStat(1, 0.0, 1.0, 4, 0.5, 0.9)]
        assert mce(bins) == pytest.approx(0.4, abs=1e-12)
        assert mce(bins) == pytest.approx(ece(bins, 4), abs=1e-12)

    def test_all_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            mce([BinStat(1, 0.0, 1.0, 0, 0.0, 0.0)])


class TestBrier:
    def test_one_hot_correct_is_zero(self):
        assert brier([[0.0, 1.0, 0.0]], [1]) == 0.0

    def test_uniform_forecast(self):
        assert brier([[0.2] * 5], [3]) == pytest.approx(0.8, abs=1e-12)

    def test_one_hot_wrong_is_two(self):
        assert brier([[1.0, 0.0, 0.0]], [2]) == pytest.approx(2.0, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            brier(np.empty((0, 2)), [])


class TestQwk:
    def test_perfect_agreement(self):
        rng = np.random.default_rng(0)
        labels = rng.integers(0, 5, size=50)
        assert qwk(labels, labels, 5) == 1.0

    def test_reversed_three_grades(self):
        want = oracles.qwk_value([0, 1, 2], [2, 1, 0], 3)
        assert qwk([0, 1, 2], [2, 1, 0], 3) == pytest.approx(want, abs=1e-12)

    def test_matches_bruteforce_on_random_pairs(self):
        rng = np.random.default_rng(11)
        pred = rng.integers(0, 5, size=200)
        act = rng.integers(0, 5, size=200)
        want = oracles.qwk_value(pred.tolist(), act.tolist(), 5)
        assert qwk(pred, act, 5) == pytest.approx(want, abs=1e-12)

    def test_degenerate_identical_marginals(self):
        assert qwk([2, 2, 2], [2, 2, 2], 5) == 1.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            qwk([0, 1], [0], 3)

    def test_label_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            qwk([0, 3], [0, 1], 3)


class TestOracleEquivalence:
    def test_all_metrics_match_bruteforce(self):
        rng = np.random.default_rng(42)
        for _ in range(30):
            probs, labels, m = random_instance(rng, max_n=200)
            bins = compute_bins(probs, labels, m)
            n = len(labels)
            assert ece(bins, n) == pytest.approx(
                oracles.ece_value(probs.tolist(), labels.tolist(), m), abs=1e-12
            )
            assert mce(bins) == pytest.approx(
                oracles.mce_value(probs.tolist(), labels.tolist(), m), abs=1e-12
            )
            assert brier(probs, labels) == pytest.approx(
                oracles.brier_value(probs.tolist(), labels.tolist()), abs=1e-12
            )
            pred = probs.argmax(axis=1)
            want = oracles.qwk_value(pred.tolist(), labels.tolist(), probs.shape[1])
            if not math.isnan(want):
                assert qwk(pred, labels, probs.shape[1]) == pytest.approx(
                    want, abs=1e-12
                )


@settings(max_examples=300, deadline=None, derandomize=True)
@given(st.integers(0, 2**32 - 1))
def test_ece_bounded_by_mce(seed):
    rng = np.random.default_rng(seed)
    probs, labels, m = random_instance(rng, max_n=60)
    bins = compute_bins(probs, labels, m)
    e = ece(bins, len(labels))
    x = mce(bins)
    assert 0.0 <= e <= x <= 1.0


@settings(max_examples=200, deadline=None, derandomize=True)
@given(st.integers(0, 2**32 - 1))
def test_sample_order_invariance(seed):
    rng = np.random.default_rng(seed)
    probs, labels, m = random_instance(rng, max_n=60)
    perm = rng.permutation(len(labels))
    bins_a = compute_bins(probs, labels, m)
    bins_b = compute_bins(probs[perm], labels[perm], m)
    assert ece(bins_a, len(labels)) == pytest.approx(
        ece(bins_b, len(labels)), abs=1e-12
    )
    assert mce(bins_a) == pytest.approx(mce(bins_b), abs=1e-12)
    assert brier(probs, labels) == pytest.approx(
        brier(probs[perm], labels[perm]), abs=1e-12
    )


@settings(max_examples=200, deadline=None, derandomize=True)
@given(st.integers(0, 2**32 - 1))
def test_qwk_symmetric_and_reflexive(seed):
    rng = np.random.default_rng(seed)
    c = int(rng.integers(2, 8))
    n = int(rng.integers(1, 80))
    a = rng.integers(0, c, size=n)
    b = rng.integers(0, c, size=n)
    try:
        forward = qwk(a, b, c)
    except ValueError:
        with pytest.raises(ValueError):
            qwk(b, a, c)
        return
    assert forward == pytest.approx(qwk(b, a, c), abs=1e-12)
    assert qwk(a, a, c) == 1.0


def test_brier_mean_of_per_sample_scores():
    rng = np.random.default_rng(5)
    probs = rng.dirichlet(np.ones(4), size=30)
    labels = rng.integers(0, 4, size=30)
    per_sample = [brier(probs[i : i + 1], labels[i : i + 1]) for i in range(30)]
    assert brier(probs, labels) == pytest.approx(np.mean(per_sample), abs=1e-12)


class TestFullReport:
    def test_perfect_predictions(self):
        rng = np.random.default_rng(1)
        pset = random_prediction_set(rng, n_samples=6, n_models=2, n_replicates=1,
                                     num_classes=4)
        dense = pset.dense()
        aggregated = np.eye(4)[dense.labels]
        report = full_report(pset, aggregated, num_bins=10)
        assert report.ece == 0.0
        assert report.mce == 0.0
        assert report.brier == 0.0
        assert report.qwk == 1.0

    def test_composition_matches_parts(self):
        rng = np.random.default_rng(2)
        pset = random_prediction_set(rng, n_samples=25, n_models=3, n_replicates=1,
                                     num_classes=5)
        dense = pset.dense()
        aggregated = rng.dirichlet(np.ones(5), size=25)
        report = full_report(pset, aggregated, num_bins=7)
        bins = compute_bins(aggregated, dense.labels, 7)
        assert report.ece == ece(bins, 25)
        assert report.mce == mce(bins)
        assert report.brier == brier(aggregated, dense.labels)
        assert report.qwk == qwk(aggregated.argmax(axis=1), dense.labels, 5)
        assert report.ece <= report.mce
        assert sum(b.count for b in report.bins) == report.n

    def test_shape_mismatch_rejected(self):
        rng = np.random.default_rng(3)
        pset = random_prediction_set(rng, n_samples=4, n_models=2, n_replicates=1,
                                     num_classes=3)
        with pytest.raises(ValueError, match="cover every sample"):
            full_report(pset, np.ones((3, 3)) / 3, num_bins=5)
