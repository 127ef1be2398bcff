"""Score accumulation, character prediction, and CRR curves."""

import numpy as np
import pytest

from spellerssl.decode import SpellerGrid, accumulate, crr_curve, predict_character
from spellerssl.errors import ConfigurationError, SpellerError

GRID = SpellerGrid()
RNG = np.random.default_rng(21)


class TestGrid:
    def test_default_layout(self):
        assert GRID.symbols() == "ABCDEFGHIJKLMNOPQRSTUVWXYZ123456789_"

    def test_symbol_lookup_round_trip(self):
        for symbol in GRID.symbols():
            row, col = GRID.codes_for(symbol)
            assert GRID.symbol_at(row, col) == symbol

    def test_duplicate_symbols_rejected(self):
        with pytest.raises(ConfigurationError):
            SpellerGrid(rows=("AAAAAA",) * 6)

    def test_unknown_symbol(self):
        with pytest.raises(SpellerError):
            GRID.codes_for("@")


class TestAccumulate:
    def test_n1_is_first_repetition(self):
        scores = RNG.normal(size=(4, 12))
        assert np.allclose(accumulate(scores, 1), scores[0])

    def test_all_ones(self):
        scores = np.ones((5, 12))
        for n in range(1, 6):
            assert np.allclose(accumulate(scores, n), n)

    def test_column_sums_oracle(self):
        scores = RNG.normal(size=(3, 12))
        expect = np.array([sum(scores[i][k] for i in range(3)) for k in range(12)])
        assert np.allclose(accumulate(scores, 3), expect)

    def test_range_errors(self):
        scores = np.zeros((3, 12))
        with pytest.raises(SpellerError):
            accumulate(scores, 0)
        with pytest.raises(SpellerError):
            accumulate(scores, 4)

    def test_monotone_accumulation_identity(self):
        scores = RNG.normal(size=(6, 12))
        for n in range(2, 7):
            assert np.allclose(accumulate(scores, n),
                               accumulate(scores, n - 1) + scores[n - 1])


class TestPredictCharacter:
    def scores_peaked(self, row, col):
        s = np.zeros(12)
        s[col - 1] = 3.0
        s[row - 1] = 2.0
        return s

    def test_codes_9_and_1_give_m(self):
        row, col, symbol = predict_character(self.scores_peaked(9, 1), GRID)
        assert (row, col, symbol) == (9, 1, "M")

    def test_codes_7_and_1_give_a(self):
        assert predict_character(self.scores_peaked(7, 1), GRID)[2] == "A"

    def test_all_equal_ties_break_low(self):
        assert predict_character(np.zeros(12), GRID) == (7, 1, "A")

    def test_constant_shift_invariance(self):
        s = RNG.normal(size=12)
        assert predict_character(s, GRID) == predict_character(s + 100.0, GRID)

    def test_positive_scaling_invariance(self):
        s = RNG.normal(size=12)
        assert predict_character(s, GRID) == predict_character(s * 7.5, GRID)

    def test_groups_are_independent(self):
        s = RNG.normal(size=12)
        boosted = s.copy()
        boosted[:6] += 50.0  # shifting all columns cannot change the row choice
        assert predict_character(s, GRID)[0] == predict_character(boosted, GRID)[0]


class TestCrrCurve:
    def matrices_for(self, targets, reps=15, strength=1.0, noise=0.0, rng=None):
        rng = rng or np.random.default_rng(0)
        mats = []
        for row, col in targets:
            scores = noise * rng.normal(size=(reps, 12))
            scores[:, row - 1] += strength
            scores[:, col - 1] += strength
            mats.append(scores)
        return mats

    def test_perfect_scores_give_100(self):
        targets = [GRID.codes_for(s) for s in "HELLO"]
        crr = crr_curve(self.matrices_for(targets), targets, GRID)
        assert np.all(crr == 100.0)

    def test_adversarial_scores_give_0(self):
        targets = [GRID.codes_for(s) for s in "WORLD"]
        mats = self.matrices_for(targets, strength=-1.0)
        crr = crr_curve(mats, targets, GRID)
        assert np.all(crr == 0.0)

    def test_brute_force_oracle_on_noisy_set(self):
        rng = np.random.default_rng(3)
        symbols = [GRID.symbols()[int(rng.integers(36))] for _ in range(100)]
        targets = [GRID.codes_for(s) for s in symbols]
        mats = self.matrices_for(targets, strength=0.4, noise=1.0, rng=rng)
        crr = crr_curve(mats, targets, GRID)

        # independent per-character reimplementation
        reps = 15
        for n in (1, 5, 15):
            correct = 0
            for scores, (row, col) in zip(mats, targets):
                sums = scores[:n].sum(axis=0)
                pred_col = int(np.argmax(sums[:6])) + 1
                pred_row = int(np.argmax(sums[6:])) + 7
                correct += int(pred_row == row and pred_col == col)
            assert crr[n - 1] == pytest.approx(100.0 * correct / 100)

    def test_empty_set_rejected(self):
        with pytest.raises(ConfigurationError):
            crr_curve([], [], GRID)

    def test_inconsistent_repetitions_rejected(self):
        targets = [(7, 1), (8, 2)]
        mats = [np.zeros((15, 12)), np.zeros((10, 12))]
        with pytest.raises(ConfigurationError):
            crr_curve(mats, targets, GRID)
