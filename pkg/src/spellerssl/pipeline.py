"""Evaluation orchestration shared by the CLI and tests: score test
trials, build per-character score matrices, and assemble the metrics
report. Test-time scoring always uses raw trials (no aggregation)."""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .aggregation import blocks_from_epochs, canonical_reorder, code_labels
from .data import EpochSet
from .decode import SpellerGrid, crr_curve
from .erphead import ErpHead, score_epochs
from .metrics import MetricsReport, binary_f1, build_report, fdr
from .unet import UNet1d


def worker_count(default: int = 1) -> int:
    """Worker parallelism cap from SPELLERSSL_THREADS (>= 1)."""
    value = os.environ.get("SPELLERSSL_THREADS")
    if value:
        return max(1, int(value))
    return default


def _score_chunked(unet: UNet1d, head: ErpHead, data: np.ndarray,
                   chunk: int = 512) -> np.ndarray:
    """Decision scores over (n, C, L); fixed chunking keeps results
    byte-identical for any worker count."""
    starts = list(range(0, data.shape[0], chunk))
    workers = worker_count()
    out = np.empty(data.shape[0], dtype=np.float64)
    if workers == 1 or len(starts) == 1:
        for s in starts:
            out[s:s + chunk] = score_epochs(unet, head, data[s:s + chunk])
        return out
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for s, scores in zip(starts, pool.map(
                lambda s: score_epochs(unet, head, data[s:s + chunk]), starts)):
            out[s:s + chunk] = scores
    return out


def evaluate_speller(unet: UNet1d, head: ErpHead, test_epochs: EpochSet,
                     grid: SpellerGrid | None = None, *, pretraining: str = "scratch",
                     group_size: int = 1, calibration_fraction: float = 1.0) -> MetricsReport:
    """Score every raw test trial and compute CRR/Acc/F1/FDR/ITR."""
    grid = grid or SpellerGrid()
    blocks = blocks_from_epochs(test_epochs, grid)
    n_chars = len(blocks)
    reps = blocks[0].n_repetitions

    ordered = np.stack([canonical_reorder(b) for b in blocks])  # (chars, R, 12, C, L)
    flat = ordered.reshape(-1, *ordered.shape[3:])
    scores = _score_chunked(unet, head, flat).reshape(n_chars, reps, 12)

    labels = np.stack([code_labels(b.target_row_code, b.target_col_code)
                       for b in blocks])                         # (chars, 12)
    labels_flat = np.broadcast_to(labels[:, None, :], scores.shape).reshape(-1)
    scores_flat = scores.reshape(-1)
    predictions = (scores_flat > 0).astype(np.int64)

    accuracy = 100.0 * float(np.mean(predictions == labels_flat))
    f1 = binary_f1(predictions, labels_flat.astype(np.int64))
    separation = fdr(scores_flat[labels_flat == 1], scores_flat[labels_flat == 0])
    targets = [(b.target_row_code, b.target_col_code) for b in blocks]
    crr = crr_curve(list(scores), targets, grid)
    return build_report(crr, accuracy, f1, separation, pretraining=pretraining,
                        group_size=group_size, calibration_fraction=calibration_fraction)
