"""Streaming writer for the EPB v1 wire format (little-endian).

Layout:
  header (21 bytes): magic b"EPB1", version u8 = 1, flags u16,
      n_trials u32, n_channels u16, n_samples u16, sample_rate f32,
      n_repetitions u16
  per trial: label u8, stimulus_code u8, repetition_index u16,
      character_index u32, target_row_code u8, target_col_code u8,
      then n_channels * n_samples float32 samples, channel-major.

Flag bit 0 marks speller-structured files (per character, R
permutations of codes 1..12); unstructured pretraining-only files clear
it and use the 0 sentinel for codes and target fields.
"""

import struct

import numpy as np

MAGIC = b"EPB1"
VERSION = 1
FLAG_SPELLER_STRUCTURE = 0x0001

_HEADER = struct.Struct("<4sBHIHHfH")
_TRIAL_META = struct.Struct("<BBHIBB")


class EpbWriter:
    """Writes trials incrementally; the trial count is fixed up front."""

    def __init__(self, path, n_trials: int, n_channels: int, n_samples: int,
                 sample_rate_hz: float, n_repetitions: int, structured: bool = True):
        self.path = path
        self.n_trials = n_trials
        self.n_channels = n_channels
        self.n_samples = n_samples
        self._written = 0
        flags = FLAG_SPELLER_STRUCTURE if structured else 0
        self._fh = open(path, "wb")
        self._fh.write(_HEADER.pack(MAGIC, VERSION, flags, n_trials, n_channels,
                                    n_samples, float(sample_rate_hz), n_repetitions))

    def write_trial(self, samples: np.ndarray, *, label: int, stimulus_code: int,
                    repetition_index: int, character_index: int,
                    target_row_code: int, target_col_code: int):
        if samples.shape != (self.n_channels, self.n_samples):
            raise ValueError(f"trial shape {samples.shape} != "
                             f"({self.n_channels}, {self.n_samples})")
        self._fh.write(_TRIAL_META.pack(label, stimulus_code, repetition_index,
                                        character_index, target_row_code, target_col_code))
        self._fh.write(np.ascontiguousarray(samples, dtype="<f4").tobytes())
        self._written += 1

    def close(self):
        self._fh.close()
        if self._written != self.n_trials:
            raise ValueError(f"wrote {self._written} trials, header promised {self.n_trials}")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self._fh.close()
        return False
