"""BCI Competition III Dataset II (P300 speller) MATLAB files -> EPB.

Each session file carries per-character continuous recordings at 240 Hz
(`Signal`, shape characters x samples x channels) together with the
flash bookkeeping (`StimulusCode`, 0 between flashes, 1..12 while a
column/row is intensified; `Flashing`; and, for the calibration file,
`StimulusType` plus `TargetChar`). Conversion band-pass filters each
character block (0.1-60 Hz, zero-phase), cuts a 160-sample epoch at
every flash onset, and emits one calibration and one test EPB plus a
JSON manifest. Test-set target characters are not stored in the
competition files; the published true label string must be supplied.
"""

import os

import numpy as np
from scipy import signal as sps
from scipy.io import loadmat

from . import ConversionError
from .epbwrite import EpbWriter
from .manifest import ConversionManifest
from .montage import CHANNEL_ORDER_64, target_codes

EPOCH_SAMPLES = 160
SAMPLE_RATE_HZ = 240.0


def _as_string(value) -> str:
    arr = np.asarray(value)
    if arr.dtype.kind in ("U", "S"):
        return "".join(str(x) for x in arr.reshape(-1))
    raise ConversionError(f"cannot interpret target characters of dtype {arr.dtype}")


def _flash_onsets(codes: np.ndarray):
    """Sample indices where StimulusCode switches from 0 to a code."""
    active = codes > 0
    starts = np.flatnonzero(active & ~np.concatenate([[False], active[:-1]]))
    return starts


def _load_session(path) -> dict:
    mat = loadmat(path, squeeze_me=False)
    missing = [k for k in ("Signal", "StimulusCode") if k not in mat]
    if missing:
        raise ConversionError(f"{path}: missing arrays {missing}")
    return mat


def _convert_session(mat, path, writer: EpbWriter, targets: str, sos,
                     stimulus_type=None):
    signal = np.asarray(mat["Signal"], dtype=np.float64)
    codes = np.asarray(mat["StimulusCode"])
    if signal.ndim != 3:
        raise ConversionError(f"{path}: Signal must be characters x samples x channels")
    n_chars, n_samples, n_channels = signal.shape
    if len(targets) != n_chars:
        raise ConversionError(f"{path}: {n_chars} characters but {len(targets)} target labels")

    for char_idx in range(n_chars):
        row_code, col_code = target_codes(targets[char_idx])
        x = sps.sosfiltfilt(sos, signal[char_idx].T, axis=1)
        char_codes = np.rint(codes[char_idx]).astype(np.int64)
        onsets = _flash_onsets(char_codes)
        if onsets.size % 12 != 0:
            raise ConversionError(
                f"{path}: character {char_idx} has {onsets.size} flashes (not a multiple of 12)")
        seen = np.zeros(13, dtype=np.int64)
        for onset in onsets:
            code = int(char_codes[onset])
            if not 1 <= code <= 12:
                raise ConversionError(f"{path}: invalid StimulusCode {code} at sample {onset}")
            if onset + EPOCH_SAMPLES > n_samples:
                raise ConversionError(
                    f"{path}: character {char_idx} flash at {onset} runs past the recording")
            label = 1 if code in (row_code, col_code) else 0
            if stimulus_type is not None:
                marked = int(np.rint(stimulus_type[char_idx, onset]))
                if marked != label:
                    raise ConversionError(
                        f"{path}: StimulusType disagrees with TargetChar at character "
                        f"{char_idx}, sample {onset}")
            writer.write_trial(x[:, onset:onset + EPOCH_SAMPLES].astype(np.float32),
                               label=label, stimulus_code=code,
                               repetition_index=int(seen[code]),
                               character_index=char_idx,
                               target_row_code=row_code, target_col_code=col_code)
            seen[code] += 1
        reps = onsets.size // 12
        if not np.all(seen[1:] == reps):
            raise ConversionError(
                f"{path}: character {char_idx} codes are not {reps} permutations of 1..12")


def _session_geometry(mat, path):
    signal = np.asarray(mat["Signal"])
    n_chars, n_samples, n_channels = signal.shape
    codes = np.rint(np.asarray(mat["StimulusCode"][0])).astype(np.int64)
    reps = _flash_onsets(codes).size // 12
    return n_chars, n_channels, reps


def convert_bci3(train_path, test_path, out_dir, *, test_target_chars: str,
                 channel_names=CHANNEL_ORDER_64,
                 bandpass_hz=(0.1, 60.0)) -> ConversionManifest:
    """Convert one subject's calibration + test session into two EPB files.

    Returns the manifest (also written to <out_dir>/manifest.json).
    """
    os.makedirs(out_dir, exist_ok=True)
    sos = sps.butter(4, list(bandpass_hz), btype="bandpass", fs=SAMPLE_RATE_HZ,
                     output="sos")

    train = _load_session(train_path)
    if "TargetChar" not in train:
        raise ConversionError(f"{train_path}: calibration file lacks TargetChar")
    train_targets = _as_string(train["TargetChar"])
    stimulus_type = np.rint(np.asarray(train["StimulusType"])).astype(np.int64) \
        if "StimulusType" in train else None

    test = _load_session(test_path)
    test_targets = test_target_chars

    outputs = []
    for name, mat, targets, stype, path in (
            ("calibration.epb", train, train_targets, stimulus_type, train_path),
            ("test.epb", test, test_targets, None, test_path)):
        n_chars, n_channels, reps = _session_geometry(mat, path)
        if n_channels != len(channel_names):
            raise ConversionError(
                f"{path}: {n_channels} channels, expected {len(channel_names)}")
        out_path = os.path.join(out_dir, name)
        with EpbWriter(out_path, n_chars * reps * 12, n_channels, EPOCH_SAMPLES,
                       SAMPLE_RATE_HZ, reps, structured=True) as writer:
            _convert_session(mat, path, writer, targets, sos, stimulus_type=stype)
        outputs.append((out_path, n_chars * reps * 12))

    manifest = ConversionManifest(
        dataset_id="bci-competition-iii-ii",
        subject_ids=[os.path.basename(str(train_path)), os.path.basename(str(test_path))],
        channel_order=list(channel_names),
        preprocessing={
            "bandpass_hz": list(bandpass_hz),
            "filter": "butterworth-4 zero-phase (cascaded second-order sections)",
            "resample": "none (source already 240 Hz)",
            "epoch_samples": EPOCH_SAMPLES,
            "epoch_offset": "flash onset",
            "filtered_by": "converter",
        })
    for path, count in outputs:
        manifest.add_output(path, count)
    manifest.write(os.path.join(out_dir, "manifest.json"))
    return manifest
