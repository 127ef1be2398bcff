"""EEG preprocessing: band-pass filtering, rational resampling, epoch
extraction, length padding, and the time-masking operator used for
self-supervised pretraining."""

from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy import signal as sps

from .errors import ConfigurationError, DataIntegrityError, ShapeError


@dataclass
class ContinuousRecording:
    """Multi-channel recording with stimulus onsets in sample units."""
    sample_rate_hz: float
    samples: np.ndarray                      # (channels, n_samples) float32
    stimulus_onsets: list                    # [(sample_index, code)] sorted

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 2:
            raise ShapeError(f"samples must be (channels, n), got shape {self.samples.shape}")
        prev = -1
        for idx, code in self.stimulus_onsets:
            if idx <= prev:
                raise DataIntegrityError("stimulus onsets must be strictly increasing")
            if not 1 <= code <= 12:
                raise DataIntegrityError(f"stimulus code {code} outside 1..12")
            prev = idx

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class MaskSpec:
    """Contiguous-block time masking; masked count is round(ratio * L)."""
    time_mask_ratio: float = 0.5
    channel_mask_ratio: float = 0.0
    block_length: int = 8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.time_mask_ratio <= 1.0:
            raise ConfigurationError(f"time_mask_ratio {self.time_mask_ratio} outside [0, 1]")
        if not 0.0 <= self.channel_mask_ratio <= 1.0:
            raise ConfigurationError(f"channel_mask_ratio {self.channel_mask_ratio} outside [0, 1]")
        if self.block_length < 1:
            raise ConfigurationError(f"block_length must be >= 1, got {self.block_length}")


def bandpass(rec: ContinuousRecording, low_hz: float = 0.1, high_hz: float = 60.0) -> ContinuousRecording:
    """Zero-phase 4th-order Butterworth band-pass (cascaded biquads,
    applied forward and backward)."""
    nyquist = rec.sample_rate_hz / 2.0
    if high_hz >= nyquist:
        raise ConfigurationError(
            f"high cutoff {high_hz} Hz >= Nyquist {nyquist} Hz at fs={rec.sample_rate_hz}")
    if not 0.0 < low_hz < high_hz:
        raise ConfigurationError(f"invalid band {low_hz}-{high_hz} Hz")
    sos = sps.butter(4, [low_hz, high_hz], btype="bandpass", fs=rec.sample_rate_hz, output="sos")
    filtered = sps.sosfiltfilt(sos, rec.samples.astype(np.float64), axis=1)
    return replace(rec, samples=filtered.astype(np.float32))


def resample(rec: ContinuousRecording, target_hz: float = 240.0) -> ContinuousRecording:
    """Polyphase rational resampling (Kaiser-windowed sinc low-pass).

    Onset indices are rescaled by the same ratio; the output keeps
    round(L * target / source) samples.
    """
    ratio = Fraction(target_hz / rec.sample_rate_hz).limit_denominator(64)
    if abs(float(ratio) - target_hz / rec.sample_rate_hz) > 1e-9:
        raise ConfigurationError(
            f"resampling ratio {target_hz}/{rec.sample_rate_hz} is not a small rational")
    up, down = ratio.numerator, ratio.denominator
    if up == down:
        return replace(rec, sample_rate_hz=float(target_hz))
    out = sps.resample_poly(rec.samples.astype(np.float64), up, down, axis=1,
                            window=("kaiser", 5.0), padtype="line")
    n_out = round(rec.n_samples * up / down)
    if out.shape[1] > n_out:
        out = out[:, :n_out]
    elif out.shape[1] < n_out:
        out = np.pad(out, ((0, 0), (0, n_out - out.shape[1])))
    onsets = [(round(idx * up / down), code) for idx, code in rec.stimulus_onsets]
    return ContinuousRecording(float(target_hz), out.astype(np.float32), onsets)


def extract_epoch(rec: ContinuousRecording, onset: int, length: int = 160) -> np.ndarray:
    """Post-stimulus window [onset, onset + length) across all channels."""
    if onset < 0 or onset + length > rec.n_samples:
        raise ShapeError(
            f"epoch [{onset}, {onset + length}) outside recording of {rec.n_samples} samples")
    return rec.samples[:, onset:onset + length].copy()


def pad_time_to_multiple(x: np.ndarray, m: int = 16) -> tuple[np.ndarray, int]:
    """Zero-pad the time axis up to the next multiple of m.

    Returns (padded, original_length) so reconstructions can be un-padded.
    """
    length = x.shape[-1]
    target = -(-length // m) * m
    if target == length:
        return x.copy(), length
    pad = [(0, 0)] * (x.ndim - 1) + [(0, target - length)]
    return np.pad(x, pad), length


def unpad_time(x: np.ndarray, original_length: int) -> np.ndarray:
    return x[..., :original_length]


def mask_time(x: np.ndarray, spec: MaskSpec) -> tuple[np.ndarray, np.ndarray]:
    """Zero random non-overlapping time blocks across all channels.

    Exactly round(ratio * L) timesteps are masked, split into blocks of
    spec.block_length (plus one shorter remainder block). Deterministic
    for a given seed.
    """
    if spec.channel_mask_ratio != 0.0:
        raise ConfigurationError("channel masking is not supported; set channel_mask_ratio=0")
    length = x.shape[-1]
    if spec.block_length > length:
        raise ConfigurationError(f"block_length {spec.block_length} exceeds L={length}")
    total = int(round(spec.time_mask_ratio * length))
    mask = np.zeros(length, dtype=bool)
    if total == 0:
        return x.copy(), mask

    rng = np.random.default_rng(np.random.PCG64(spec.seed))
    lengths = [spec.block_length] * (total // spec.block_length)
    if total % spec.block_length:
        lengths.append(total % spec.block_length)
    rng.shuffle(lengths)
    gaps = rng.multinomial(length - total, [1.0 / (len(lengths) + 1)] * (len(lengths) + 1))
    cursor = 0
    for block, gap in zip(lengths, gaps[:-1]):
        cursor += int(gap)
        mask[cursor:cursor + block] = True
        cursor += block

    masked = x.copy()
    masked[..., mask] = 0.0
    return masked, mask
