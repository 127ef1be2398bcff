"""Synthetic BCI Competition III-II session files for converter tests."""

import numpy as np
from scipy.io import savemat

FLASH_SAMPLES = 24      # 100 ms at 240 Hz
ISI_SAMPLES = 18        # 75 ms at 240 Hz
LEAD_IN = 40
TAIL = 200

MATRIX_ROWS = ("ABCDEF", "GHIJKL", "MNOPQR", "STUVWX", "YZ1234", "56789_")


def symbol_codes(symbol):
    for r, row in enumerate(MATRIX_ROWS):
        c = row.find(symbol)
        if c >= 0:
            return r + 7, c + 1
    raise KeyError(symbol)


def make_session(path, targets: str, channels=8, reps=15, seed=0, calibration=True):
    """Write a .mat file shaped like a competition session recording."""
    rng = np.random.default_rng(seed)
    n_chars = len(targets)
    stride = FLASH_SAMPLES + ISI_SAMPLES
    n_samples = LEAD_IN + reps * 12 * stride + TAIL

    signal = rng.normal(scale=10.0, size=(n_chars, n_samples, channels)).astype(np.float32)
    codes = np.zeros((n_chars, n_samples), dtype=np.float64)
    flashing = np.zeros((n_chars, n_samples), dtype=np.float64)
    stype = np.zeros((n_chars, n_samples), dtype=np.float64)

    for char_idx, symbol in enumerate(targets):
        row_code, col_code = symbol_codes(symbol)
        t = LEAD_IN
        for _ in range(reps):
            for code in rng.permutation(12) + 1:
                codes[char_idx, t:t + FLASH_SAMPLES] = code
                flashing[char_idx, t:t + FLASH_SAMPLES] = 1.0
                if code in (row_code, col_code):
                    stype[char_idx, t:t + FLASH_SAMPLES] = 1.0
                t += stride

    payload = {"Signal": signal, "StimulusCode": codes, "Flashing": flashing}
    if calibration:
        payload["StimulusType"] = stype
        payload["TargetChar"] = targets
    savemat(path, payload)
    return payload
