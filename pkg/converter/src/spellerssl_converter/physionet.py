"""PhysionetMI motor-imagery trials -> unstructured pretraining EPB.

The default loader pulls the dataset through MOABB; a custom
loader(subjects) -> (trials, sample_rate_hz) can be injected for
offline sources. Trials are resampled to 240 Hz and truncated to the
first 160 samples after resampling (recorded in the manifest); labels
and stimulus codes are the 0 sentinel because pretraining ignores them.
"""

import os
from fractions import Fraction

import numpy as np
from scipy import signal as sps

from . import ConversionError, RetryableFetchError
from .epbwrite import EpbWriter
from .manifest import ConversionManifest
from .montage import CHANNEL_ORDER_64

EPOCH_SAMPLES = 160
TARGET_HZ = 240.0


def _moabb_loader(subjects):
    try:
        from moabb.datasets import PhysionetMI
        from moabb.paradigms import MotorImagery
    except ImportError as exc:
        raise RetryableFetchError(
            "moabb is not installed; pip install moabb or pass loader=") from exc
    try:
        dataset = PhysionetMI()
        paradigm = MotorImagery()
        trials, _, _ = paradigm.get_data(dataset=dataset, subjects=list(subjects))
    except Exception as exc:
        raise RetryableFetchError(f"PhysionetMI fetch failed: {exc}") from exc
    return np.asarray(trials, dtype=np.float32), 160.0


def resample_trials(trials: np.ndarray, source_hz: float,
                    target_hz: float = TARGET_HZ) -> np.ndarray:
    if source_hz == target_hz:
        return trials.astype(np.float32)
    ratio = Fraction(target_hz / source_hz).limit_denominator(64)
    if abs(float(ratio) - target_hz / source_hz) > 1e-9:
        raise ConversionError(f"resampling ratio {target_hz}/{source_hz} is not a small rational")
    out = sps.resample_poly(trials.astype(np.float64), ratio.numerator, ratio.denominator,
                            axis=-1, window=("kaiser", 5.0), padtype="line")
    return out.astype(np.float32)


def convert_physionet(subjects, out_path, *, loader=None,
                      channel_names=CHANNEL_ORDER_64) -> ConversionManifest:
    """Convert motor-imagery trials to one unstructured EPB file.

    Returns the manifest (also written next to the EPB as <out>.manifest.json).
    """
    loader = loader or _moabb_loader
    trials, source_hz = loader(subjects)
    trials = np.asarray(trials)
    if trials.ndim != 3:
        raise ConversionError(f"loader must return (n, channels, samples), got {trials.shape}")
    if trials.shape[1] != len(channel_names):
        raise ConversionError(
            f"channel mismatch: data has {trials.shape[1]}, montage has {len(channel_names)}")

    resampled = resample_trials(trials, float(source_hz))
    if resampled.shape[-1] < EPOCH_SAMPLES:
        raise ConversionError(
            f"trials are {resampled.shape[-1]} samples after resampling; need {EPOCH_SAMPLES}")
    resampled = resampled[:, :, :EPOCH_SAMPLES]

    n = resampled.shape[0]
    with EpbWriter(out_path, n, resampled.shape[1], EPOCH_SAMPLES, TARGET_HZ,
                   n_repetitions=0, structured=False) as writer:
        for i in range(n):
            writer.write_trial(resampled[i], label=0, stimulus_code=0,
                               repetition_index=0, character_index=i,
                               target_row_code=0, target_col_code=0)

    manifest = ConversionManifest(
        dataset_id="physionet-mi",
        subject_ids=list(subjects),
        channel_order=list(channel_names),
        preprocessing={
            "resample_hz": TARGET_HZ,
            "resampler": "polyphase kaiser(5.0), line padding",
            "epoch_samples": EPOCH_SAMPLES,
            "epoch_offset": "first 160 samples post-resampling",
            "labels": "0 sentinel (pretraining ignores labels)",
        })
    manifest.add_output(out_path, n)
    manifest.write(f"{out_path}.manifest.json")
    return manifest
