"""Repetition-wise score accumulation and character prediction on the
6x6 speller grid (columns are codes 1..6, rows are codes 7..12)."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SpellerError


DEFAULT_LAYOUT = ("ABCDEF", "GHIJKL", "MNOPQR", "STUVWX", "YZ1234", "56789_")


@dataclass(frozen=True)
class SpellerGrid:
    """6x6 symbol matrix with the row/column flash-code convention."""
    rows: tuple = DEFAULT_LAYOUT

    def __post_init__(self):
        if len(self.rows) != 6 or any(len(r) != 6 for r in self.rows):
            raise ConfigurationError("grid must be 6 rows of 6 symbols")
        if len(set("".join(self.rows))) != 36:
            raise ConfigurationError("grid symbols must be distinct")

    def symbols(self) -> str:
        return "".join(self.rows)

    def symbol_at(self, row_code: int, col_code: int) -> str:
        if not (7 <= row_code <= 12 and 1 <= col_code <= 6):
            raise SpellerError(f"codes ({row_code}, {col_code}) outside row 7..12 / col 1..6")
        return self.rows[row_code - 7][col_code - 1]

    def codes_for(self, symbol: str) -> tuple[int, int]:
        """(row_code, col_code) of a symbol; raises on unknown symbols."""
        for r, row in enumerate(self.rows):
            c = row.find(symbol)
            if c >= 0:
                return r + 7, c + 1
        raise SpellerError(f"symbol {symbol!r} not in grid")


def accumulate(scores: np.ndarray, n: int) -> np.ndarray:
    """Per-code sums of the first n repetitions of an (R, 12) score matrix."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] != 12:
        raise SpellerError(f"score matrix must be (R, 12), got shape {scores.shape}")
    if not 1 <= n <= scores.shape[0]:
        raise SpellerError(f"n={n} outside 1..{scores.shape[0]}")
    return scores[:n].sum(axis=0)


def predict_character(cumulative: np.ndarray, grid: SpellerGrid) -> tuple[int, int, str]:
    """Argmax over column codes 1..6 and row codes 7..12 (ties -> lowest code)."""
    s = np.asarray(cumulative, dtype=np.float64).reshape(12)
    col_code = int(np.argmax(s[:6])) + 1
    row_code = int(np.argmax(s[6:])) + 7
    return row_code, col_code, grid.symbol_at(row_code, col_code)


def crr_curve(score_matrices, targets, grid: SpellerGrid) -> np.ndarray:
    """Character recognition rate (percent) after n = 1..R repetitions.

    `targets` holds the true (row_code, col_code) per character.
    """
    if not score_matrices:
        raise ConfigurationError("crr_curve needs at least one character")
    r = np.asarray(score_matrices[0]).shape[0]
    correct = np.zeros(r, dtype=np.int64)
    for scores, (row_code, col_code) in zip(score_matrices, targets):
        scores = np.asarray(scores, dtype=np.float64)
        if scores.shape[0] != r:
            raise ConfigurationError("inconsistent repetition counts across characters")
        running = np.cumsum(scores, axis=0)
        for n in range(r):
            pred_row, pred_col, _ = predict_character(running[n], grid)
            if pred_row == row_code and pred_col == col_code:
                correct[n] += 1
    return 100.0 * correct / len(score_matrices)
