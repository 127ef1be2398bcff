"""Code-aligned canonical reordering and sliding-window averaging of
speller repetitions, with per-code label preservation.

A character selection spans R repetitions of 12 flashes. Trials are
stored in temporal flash order together with their stimulus codes;
reordering aligns them to the fixed code order 1..12, after which G
consecutive repetitions can be averaged per code without disturbing the
two-target / ten-non-target pattern of every window.
"""

from dataclasses import dataclass

import numpy as np

from .data import EpochSet
from .decode import SpellerGrid
from .errors import ConfigurationError, DataIntegrityError


@dataclass
class CharacterBlock:
    """All R repetitions of one character selection, in temporal order."""
    character: str
    trials: np.ndarray          # (R, 12, C, L) float32
    temporal_codes: np.ndarray  # (R, 12) stimulus codes in flash order
    target_row_code: int        # 7..12
    target_col_code: int        # 1..6

    def __post_init__(self):
        self.trials = np.asarray(self.trials, dtype=np.float32)
        self.temporal_codes = np.asarray(self.temporal_codes)
        if self.trials.ndim != 4 or self.trials.shape[1] != 12:
            raise DataIntegrityError(f"trials must be (R, 12, C, L), got {self.trials.shape}")
        if self.temporal_codes.shape != self.trials.shape[:2]:
            raise DataIntegrityError("temporal_codes shape must match (R, 12)")
        if not (7 <= self.target_row_code <= 12 and 1 <= self.target_col_code <= 6):
            raise DataIntegrityError(
                f"target codes ({self.target_row_code}, {self.target_col_code}) invalid")

    @property
    def n_repetitions(self) -> int:
        return self.trials.shape[0]

    @property
    def target_codes(self) -> frozenset:
        return frozenset((self.target_row_code, self.target_col_code))


@dataclass
class AggregatedBlock:
    """Sliding-window means in canonical code order, labels preserved."""
    character: str
    windows: np.ndarray   # (R - G + 1, 12, C, L)
    labels: np.ndarray    # (12,) bool, True at the two target codes
    group_size: int
    target_row_code: int
    target_col_code: int


def canonical_reorder(block: CharacterBlock) -> np.ndarray:
    """Permute each repetition so index k-1 holds the trial of code k."""
    r = block.n_repetitions
    ordered = np.empty_like(block.trials)
    for rep in range(r):
        codes = block.temporal_codes[rep]
        if not np.array_equal(np.sort(codes), np.arange(1, 13)):
            raise DataIntegrityError(
                f"repetition {rep}: codes are not a permutation of 1..12")
        ordered[rep, codes - 1] = block.trials[rep]
    return ordered


def labels_for_character(character: str, grid: SpellerGrid) -> frozenset:
    """The two target codes of a symbol: {row_code, col_code}."""
    row_code, col_code = grid.codes_for(character)
    return frozenset((row_code, col_code))


def code_labels(target_row_code: int, target_col_code: int) -> np.ndarray:
    labels = np.zeros(12, dtype=bool)
    labels[target_row_code - 1] = True
    labels[target_col_code - 1] = True
    return labels


def aggregate(block: CharacterBlock, group_size: int) -> AggregatedBlock:
    """Average each code over G consecutive repetitions (overlapping
    windows r = 1..R-G+1); summation runs in ascending repetition order."""
    r = block.n_repetitions
    if not 1 <= group_size <= r:
        raise ConfigurationError(f"group size {group_size} outside 1..{r}")
    ordered = canonical_reorder(block)
    n_windows = r - group_size + 1
    windows = np.empty((n_windows, 12, *ordered.shape[2:]), dtype=ordered.dtype)
    for w in range(n_windows):
        acc = ordered[w].astype(np.float64)
        for t in range(w + 1, w + group_size):
            acc += ordered[t]
        windows[w] = (acc / group_size).astype(ordered.dtype)
    return AggregatedBlock(block.character, windows,
                           code_labels(block.target_row_code, block.target_col_code),
                           group_size, block.target_row_code, block.target_col_code)


def blocks_from_epochs(epochs: EpochSet, grid: SpellerGrid | None = None) -> list:
    """Group a structured EpochSet into CharacterBlocks (temporal order)."""
    if not epochs.structured:
        raise DataIntegrityError("epoch set is not speller-structured")
    grid = grid or SpellerGrid()
    blocks = []
    r = epochs.n_repetitions
    for char in epochs.character_ids():
        sel = np.flatnonzero(epochs.character_indices == char)
        reps = epochs.repetition_indices[sel]
        trials = np.empty((r, 12, epochs.n_channels, epochs.n_samples), dtype=np.float32)
        codes = np.empty((r, 12), dtype=np.int64)
        for rep in range(r):
            rows = sel[reps == rep]
            if rows.size != 12:
                raise DataIntegrityError(f"character {char} repetition {rep}: {rows.size} trials")
            trials[rep] = epochs.data[rows]
            codes[rep] = epochs.stimulus_codes[rows]
        row_code = int(epochs.target_row_codes[sel[0]])
        col_code = int(epochs.target_col_codes[sel[0]])
        blocks.append(CharacterBlock(grid.symbol_at(row_code, col_code), trials, codes,
                                     row_code, col_code))
    return blocks


def build_training_set(blocks, group_size: int) -> EpochSet:
    """Flatten aggregated windows from calibration blocks into a labeled
    EpochSet (evaluation paths never aggregate; they score raw trials)."""
    if not blocks:
        raise ConfigurationError("no character blocks given")
    shapes = {b.trials.shape[1:] for b in blocks}
    reps = {b.n_repetitions for b in blocks}
    if len(shapes) != 1 or len(reps) != 1:
        raise DataIntegrityError(f"heterogeneous blocks: shapes {shapes}, repetitions {reps}")

    datas, labels, codes, wreps, chars, rows, cols = [], [], [], [], [], [], []
    for char_idx, block in enumerate(blocks):
        agg = aggregate(block, group_size)
        n_windows = agg.windows.shape[0]
        datas.append(agg.windows.reshape(-1, *agg.windows.shape[2:]))
        labels.append(np.tile(agg.labels.astype(np.uint8), n_windows))
        codes.append(np.tile(np.arange(1, 13, dtype=np.uint8), n_windows))
        wreps.append(np.repeat(np.arange(n_windows, dtype=np.uint16), 12))
        chars.append(np.full(n_windows * 12, char_idx, dtype=np.uint32))
        rows.append(np.full(n_windows * 12, block.target_row_code, dtype=np.uint8))
        cols.append(np.full(n_windows * 12, block.target_col_code, dtype=np.uint8))

    n_windows = blocks[0].n_repetitions - group_size + 1
    return EpochSet(np.concatenate(datas), np.concatenate(labels), np.concatenate(codes),
                    np.concatenate(wreps), np.concatenate(chars), np.concatenate(rows),
                    np.concatenate(cols), n_repetitions=n_windows)
