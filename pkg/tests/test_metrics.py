"""Binary F1, Fisher's discriminant ratio, selection timing, ITR."""

import math

import numpy as np
import pytest

from spellerssl.errors import LabelError, SpellerError, StatisticsError
from spellerssl.metrics import binary_f1, build_report, fdr, itr, selection_time

RNG = np.random.default_rng(31)


class TestBinaryF1:
    def test_perfect(self):
        labels = RNG.integers(0, 2, size=50)
        assert binary_f1(labels, labels) == 1.0

    def test_all_negative_predictions(self):
        labels = np.array([0, 1, 1, 0, 1])
        assert binary_f1(np.zeros(5, dtype=int), labels) == 0.0

    def test_formula_arithmetic(self):
        # TP=2, FP=2, FN=1 -> precision .5, recall 2/3 -> F1 = 4/7
        predictions = [1, 1, 1, 1, 0, 0]
        labels = [1, 1, 0, 0, 1, 0]
        assert binary_f1(predictions, labels) == pytest.approx(4 / 7)

    def test_permutation_invariance(self):
        predictions = RNG.integers(0, 2, size=40)
        labels = RNG.integers(0, 2, size=40)
        perm = RNG.permutation(40)
        assert binary_f1(predictions, labels) == binary_f1(predictions[perm], labels[perm])

    def test_label_validation(self):
        with pytest.raises(LabelError):
            binary_f1([0, 2], [0, 1])


class TestFdr:
    def test_identical_groups(self):
        samples = RNG.normal(size=20)
        assert fdr(samples, samples) == 0.0

    def test_formula_arithmetic(self):
        # means 1 and 0, population variances 0.5 each -> FDR = 1.0
        p = np.array([1 + math.sqrt(0.5), 1 - math.sqrt(0.5)])
        n = np.array([math.sqrt(0.5), -math.sqrt(0.5)])
        assert fdr(p, n) == pytest.approx(1.0)

    def test_translation_invariance(self):
        p, n = RNG.normal(1.0, 1.0, 100), RNG.normal(0.0, 1.0, 100)
        assert fdr(p, n) == pytest.approx(fdr(p + 3.7, n + 3.7))

    def test_scaling_invariance(self):
        p, n = RNG.normal(1.0, 1.0, 100), RNG.normal(0.0, 1.0, 100)
        assert fdr(p, n) == pytest.approx(fdr(2.5 * p, 2.5 * n))

    def test_population_variance_convention(self):
        p = np.array([0.0, 2.0])   # mean 1, population var 1
        n = np.array([-1.0, 1.0])  # mean 0, population var 1
        assert fdr(p, n) == pytest.approx(1.0 / 2.0)

    def test_degenerate_sizes(self):
        with pytest.raises(StatisticsError):
            fdr([1.0], [0.0, 1.0])

    def test_zero_variance_equal_means(self):
        assert fdr([1.0, 1.0], [1.0, 1.0]) == 0.0


class TestSelectionTime:
    def test_values(self):
        assert selection_time(1) == pytest.approx(4.6)
        assert selection_time(2) == pytest.approx(6.7)
        assert selection_time(15) == pytest.approx(34.0)

    def test_range(self):
        with pytest.raises(SpellerError):
            selection_time(0)


class TestItr:
    def test_published_pairs(self):
        assert itr(0.65, 2) == pytest.approx(21.86, abs=0.02)
        assert itr(0.94, 7) == pytest.approx(15.82, abs=0.02)
        assert itr(0.43, 1) == pytest.approx(16.44, abs=0.02)

    def test_chance_level_is_zero(self):
        assert itr(1 / 36, 1) == pytest.approx(0.0, abs=1e-12)
        assert itr(1 / 36, 9) == pytest.approx(0.0, abs=1e-12)

    def test_perfect_accuracy_limit(self):
        assert itr(1.0, 1) == pytest.approx(60.0 / 4.6 * math.log2(36))

    def test_zero_accuracy_limit_finite(self):
        assert math.isfinite(itr(0.0, 1))

    def test_strictly_increasing_in_accuracy(self):
        values = [itr(a, 3) for a in np.linspace(1 / 36 + 1e-6, 1.0, 50)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_strictly_decreasing_in_repetitions(self):
        values = [itr(0.9, r) for r in range(1, 16)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_accuracy_range(self):
        with pytest.raises(SpellerError):
            itr(1.2, 1)


class TestBuildReport:
    def crr(self):
        return np.linspace(30, 95, 15)

    def test_itr_column_recomputable(self):
        report = build_report(self.crr(), 70.0, 0.45, 0.6)
        for r in range(15):
            assert report.itr_per_repetition[r] == itr(report.crr_per_repetition[r] / 100,
                                                       r + 1, 36)

    def test_row_count_is_15(self):
        report = build_report(self.crr(), 70.0, 0.45, 0.6)
        assert report.crr_per_repetition.size == 15
        assert report.itr_per_repetition.size == 15

    def test_perfect_classifier(self):
        report = build_report(np.full(15, 100.0), 100.0, 1.0, 5.0)
        assert np.all(report.crr_per_repetition == 100.0)
        assert report.binary_f1 == 1.0

    def test_missing_component_rejected(self):
        with pytest.raises(SpellerError):
            build_report(np.array([]), 70.0, 0.5, 0.5)

    def test_range_validation(self):
        with pytest.raises(SpellerError):
            build_report(np.full(15, 101.0), 70.0, 0.5, 0.5)
