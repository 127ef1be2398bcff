"""Epoch storage and generation: the EPB binary container, synthetic
ERP datasets, calibration splitting, and model checkpoints.

EPB wire format (version 1, little-endian throughout)
-----------------------------------------------------
header (21 bytes):
    magic        4s   b"EPB1"
    version      u8   1
    flags        u16  bit 0: speller-structured (R permutations of 1..12
                      per character); clear for unstructured pretraining
                      sets whose codes are the 0 sentinel
    n_trials     u32
    n_channels   u16
    n_samples    u16
    sample_rate  f32
    n_repetitions u16
per-trial record (10 + 4*C*L bytes):
    label            u8   0 | 1
    stimulus_code    u8   1..12 (0 sentinel when unstructured)
    repetition_index u16
    character_index  u32
    target_row_code  u8   7..12 (0 when unstructured)
    target_col_code  u8   1..6  (0 when unstructured)
    samples          f32[C*L] channel-major

Checkpoint wire format (version 1, little-endian)
-------------------------------------------------
magic b"CKP1", version u8, config_hash 32s (sha256 of the model config),
training_step u64, seed u64, n_entries u32; then per entry:
name_len u16, name utf-8, ndim u8, dims u32 each, values f32.
"""

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataIntegrityError, FormatError, LoadError

EPB_MAGIC = b"EPB1"
EPB_VERSION = 1
FLAG_SPELLER_STRUCTURE = 0x0001

_HEADER = struct.Struct("<4sBHIHHfH")
_TRIAL_META = struct.Struct("<BBHIBB")

CKPT_MAGIC = b"CKP1"
CKPT_VERSION = 1


@dataclass
class EpochSet:
    """Flat collection of EEG trials with per-trial speller metadata."""
    data: np.ndarray                 # (n_trials, channels, samples) float32
    labels: np.ndarray               # (n_trials,) uint8
    stimulus_codes: np.ndarray       # (n_trials,) uint8
    repetition_indices: np.ndarray   # (n_trials,) uint16
    character_indices: np.ndarray    # (n_trials,) uint32
    target_row_codes: np.ndarray     # (n_trials,) uint8
    target_col_codes: np.ndarray     # (n_trials,) uint8
    sample_rate_hz: float = 240.0
    n_repetitions: int = 15
    flags: int = FLAG_SPELLER_STRUCTURE

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_samples(self) -> int:
        return self.data.shape[2]

    @property
    def structured(self) -> bool:
        return bool(self.flags & FLAG_SPELLER_STRUCTURE)

    def character_ids(self) -> np.ndarray:
        """Distinct character indices in first-appearance order."""
        _, first = np.unique(self.character_indices, return_index=True)
        return self.character_indices[np.sort(first)]

    @property
    def n_characters(self) -> int:
        return int(np.unique(self.character_indices).size)

    def validate(self):
        n = self.n_trials
        for name in ("labels", "stimulus_codes", "repetition_indices",
                     "character_indices", "target_row_codes", "target_col_codes"):
            if getattr(self, name).shape != (n,):
                raise DataIntegrityError(f"{name} length does not match {n} trials")
        if np.any(self.labels > 1):
            raise DataIntegrityError("labels must be 0 or 1")
        if not self.structured:
            return
        r = self.n_repetitions
        for char in self.character_ids():
            sel = self.character_indices == char
            if int(sel.sum()) != r * 12:
                raise DataIntegrityError(
                    f"character {char}: expected {r * 12} trials, found {int(sel.sum())}")
            codes = self.stimulus_codes[sel]
            reps = self.repetition_indices[sel]
            for rep in range(r):
                rep_codes = np.sort(codes[reps == rep])
                if not np.array_equal(rep_codes, np.arange(1, 13)):
                    raise DataIntegrityError(
                        f"character {char} repetition {rep}: codes are not a permutation of 1..12")
            rows = np.unique(self.target_row_codes[sel])
            cols = np.unique(self.target_col_codes[sel])
            if rows.size != 1 or cols.size != 1:
                raise DataIntegrityError(f"character {char}: inconsistent target codes")
            if not (7 <= rows[0] <= 12 and 1 <= cols[0] <= 6):
                raise DataIntegrityError(
                    f"character {char}: target codes ({rows[0]}, {cols[0]}) outside row 7..12 / col 1..6")
            expect = ((codes == rows[0]) | (codes == cols[0])).astype(np.uint8)
            if not np.array_equal(expect, self.labels[sel]):
                raise DataIntegrityError(f"character {char}: labels disagree with target codes")


def write_epb(path, epochs: EpochSet):
    """Serialize an EpochSet; the on-disk bytes round-trip bit-exactly."""
    epochs.validate()
    header = _HEADER.pack(EPB_MAGIC, EPB_VERSION, epochs.flags, epochs.n_trials,
                          epochs.n_channels, epochs.n_samples,
                          float(epochs.sample_rate_hz), epochs.n_repetitions)
    with open(path, "wb") as fh:
        fh.write(header)
        payload = np.ascontiguousarray(epochs.data, dtype="<f4")
        for i in range(epochs.n_trials):
            fh.write(_TRIAL_META.pack(int(epochs.labels[i]), int(epochs.stimulus_codes[i]),
                                      int(epochs.repetition_indices[i]),
                                      int(epochs.character_indices[i]),
                                      int(epochs.target_row_codes[i]),
                                      int(epochs.target_col_codes[i])))
            fh.write(payload[i].tobytes())


def read_epb(path) -> EpochSet:
    """Parse and structurally validate an EPB file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, flags, n_trials, n_channels, n_samples, rate, n_reps = \
        _HEADER.unpack_from(raw, 0)
    if magic != EPB_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != EPB_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    record = _TRIAL_META.size + 4 * n_channels * n_samples
    expected = _HEADER.size + n_trials * record
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {n_trials} trials, got {len(raw)}")

    data = np.empty((n_trials, n_channels, n_samples), dtype=np.float32)
    labels = np.empty(n_trials, dtype=np.uint8)
    codes = np.empty(n_trials, dtype=np.uint8)
    reps = np.empty(n_trials, dtype=np.uint16)
    chars = np.empty(n_trials, dtype=np.uint32)
    rows = np.empty(n_trials, dtype=np.uint8)
    cols = np.empty(n_trials, dtype=np.uint8)
    off = _HEADER.size
    for i in range(n_trials):
        labels[i], codes[i], reps[i], chars[i], rows[i], cols[i] = \
            _TRIAL_META.unpack_from(raw, off)
        off += _TRIAL_META.size
        data[i] = np.frombuffer(raw, dtype="<f4", count=n_channels * n_samples,
                                offset=off).reshape(n_channels, n_samples)
        off += 4 * n_channels * n_samples

    epochs = EpochSet(data, labels, codes, reps, chars, rows, cols,
                      sample_rate_hz=float(rate), n_repetitions=int(n_reps),
                      flags=int(flags))
    epochs.validate()
    return epochs


# ---------------------------------------------------------------------------
# synthetic ERP generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    """Desk-scale synthetic speller dataset.

    Target epochs carry a Gaussian bump (positive over "centro-parietal"
    channels, sign-flipped over the trailing "occipital" quarter) on top
    of a white/pink noise mix; non-target epochs are noise only.
    """
    n_characters: int = 36
    channels: int = 8
    n_repetitions: int = 15
    sample_rate_hz: float = 240.0
    epoch_length: int = 160
    p300_amplitude: float = 1.0
    p300_latency_s: float = 0.3
    p300_width_s: float = 0.05
    noise_sigma: float = 1.0
    pink_noise_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_characters < 1 or self.channels < 1 or self.n_repetitions < 1:
            raise ConfigurationError("n_characters, channels and n_repetitions must be >= 1")
        duration = self.epoch_length / self.sample_rate_hz
        if self.p300_latency_s + 3.0 * self.p300_width_s > duration:
            raise ConfigurationError(
                f"template (latency {self.p300_latency_s}s + 3*width) exceeds the "
                f"{duration:.3f}s epoch")
        if not 0.0 <= self.pink_noise_fraction <= 1.0:
            raise ConfigurationError("pink_noise_fraction must lie in [0, 1]")


def channel_gains(channels: int) -> np.ndarray:
    """Fixed per-channel template gains: a 1.0 -> 0.4 ramp over the leading
    three quarters, -0.3 on the trailing quarter. Arbitrary but documented;
    not a physiological claim."""
    n_neg = max(1, channels // 4) if channels > 1 else 0
    n_pos = channels - n_neg
    gains = np.empty(channels, dtype=np.float64)
    gains[:n_pos] = np.linspace(1.0, 0.4, n_pos) if n_pos > 1 else 1.0
    gains[n_pos:] = -0.3
    return gains


def p300_template(config: SynthConfig) -> np.ndarray:
    """(channels, epoch_length) noiseless target response."""
    t = np.arange(config.epoch_length) / config.sample_rate_hz
    bump = config.p300_amplitude * np.exp(
        -0.5 * ((t - config.p300_latency_s) / config.p300_width_s) ** 2)
    return np.outer(channel_gains(config.channels), bump)


def _pink_noise(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance 1/f noise along the last axis (spectral shaping)."""
    white = rng.standard_normal(shape)
    spec = np.fft.rfft(white, axis=-1)
    freqs = np.fft.rfftfreq(shape[-1])
    weights = np.zeros_like(freqs)
    weights[1:] = 1.0 / np.sqrt(freqs[1:])
    spec *= weights
    pink = np.fft.irfft(spec, n=shape[-1], axis=-1)
    std = pink.std(axis=-1, keepdims=True)
    std[std == 0] = 1.0
    return pink / std


def _noise(rng: np.random.Generator, config: SynthConfig, shape) -> np.ndarray:
    p = config.pink_noise_fraction
    out = np.sqrt(1.0 - p) * rng.standard_normal(shape)
    if p > 0.0:
        out += np.sqrt(p) * _pink_noise(rng, shape)
    return config.noise_sigma * out


def synth_generate(config: SynthConfig, grid=None) -> EpochSet:
    """Generate a structured synthetic EpochSet (deterministic per seed)."""
    from .decode import SpellerGrid

    grid = grid or SpellerGrid()
    rng = np.random.default_rng(np.random.PCG64(config.seed))
    template = p300_template(config)
    n_trials = config.n_characters * config.n_repetitions * 12
    c, length = config.channels, config.epoch_length

    data = np.empty((n_trials, c, length), dtype=np.float32)
    labels = np.empty(n_trials, dtype=np.uint8)
    codes = np.empty(n_trials, dtype=np.uint8)
    reps = np.empty(n_trials, dtype=np.uint16)
    chars = np.empty(n_trials, dtype=np.uint32)
    rows = np.empty(n_trials, dtype=np.uint8)
    cols = np.empty(n_trials, dtype=np.uint8)

    symbols = grid.symbols()
    i = 0
    for char_idx in range(config.n_characters):
        symbol = symbols[rng.integers(len(symbols))]
        row_code, col_code = grid.codes_for(symbol)
        for rep in range(config.n_repetitions):
            order = rng.permutation(12) + 1
            for code in order:
                is_target = code == row_code or code == col_code
                epoch = _noise(rng, config, (c, length))
                if is_target:
                    epoch = epoch + template
                data[i] = epoch.astype(np.float32)
                labels[i] = 1 if is_target else 0
                codes[i] = code
                reps[i] = rep
                chars[i] = char_idx
                rows[i] = row_code
                cols[i] = col_code
                i += 1

    return EpochSet(data, labels, codes, reps, chars, rows, cols,
                    sample_rate_hz=config.sample_rate_hz,
                    n_repetitions=config.n_repetitions)


def split_calibration(epochs: EpochSet, fraction: float) -> EpochSet:
    """Keep the first floor(fraction * n_characters) whole characters."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigurationError(f"fraction {fraction} outside (0, 1]")
    order = epochs.character_ids()
    keep = int(fraction * order.size)
    if keep < 1:
        raise ConfigurationError(f"fraction {fraction} keeps zero of {order.size} characters")
    if keep == order.size:
        return epochs
    sel = np.isin(epochs.character_indices, order[:keep])
    return EpochSet(epochs.data[sel], epochs.labels[sel], epochs.stimulus_codes[sel],
                    epochs.repetition_indices[sel], epochs.character_indices[sel],
                    epochs.target_row_codes[sel], epochs.target_col_codes[sel],
                    sample_rate_hz=epochs.sample_rate_hz,
                    n_repetitions=epochs.n_repetitions, flags=epochs.flags)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def config_hash(config: dict) -> bytes:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).digest()


@dataclass
class ModelCheckpoint:
    """Named float32 tensors plus provenance metadata."""
    entries: dict                    # name -> np.ndarray (float32)
    config_hash: bytes = b"\x00" * 32
    training_step: int = 0
    seed: int = 0
    version: int = CKPT_VERSION

    def __post_init__(self):
        if len(self.config_hash) != 32:
            raise ConfigurationError("config_hash must be 32 bytes")

    def filtered(self, prefixes) -> dict:
        return {k: v for k, v in self.entries.items()
                if any(k.startswith(p) for p in prefixes)}


def save_checkpoint(path, checkpoint: ModelCheckpoint):
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<B", checkpoint.version))
        fh.write(checkpoint.config_hash)
        fh.write(struct.pack("<QQI", checkpoint.training_step, checkpoint.seed,
                             len(checkpoint.entries)))
        for name, values in checkpoint.entries.items():
            encoded = name.encode()
            arr = np.ascontiguousarray(values, dtype="<f4")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> ModelCheckpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 + 1 + 32 + 20 or raw[:4] != CKPT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint file")
    version = raw[4]
    if version != CKPT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    chash = raw[5:37]
    step, seed, n_entries = struct.unpack_from("<QQI", raw, 37)
    off = 37 + 20
    entries = {}
    try:
        for _ in range(n_entries):
            (name_len,) = struct.unpack_from("<H", raw, off)
            off += 2
            name = raw[off:off + name_len].decode()
            off += name_len
            ndim = raw[off]
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", raw, off)
            off += 4 * ndim
            count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            values = np.frombuffer(raw, dtype="<f4", count=count, offset=off)
            off += 4 * count
            entries[name] = values.reshape(shape).astype(np.float32)
    except (struct.error, ValueError) as exc:
        raise FormatError(f"{path}: truncated checkpoint ({exc})") from exc
    return ModelCheckpoint(entries, config_hash=chash, training_step=int(step), seed=int(seed))


def apply_checkpoint(model, checkpoint: ModelCheckpoint, prefixes=None):
    """Copy checkpoint entries into a model's named tensors.

    With `prefixes`, only matching names are restored. Returns
    (loaded_names, skipped_names). Raises LoadError on a shape mismatch
    or when a requested prefix has missing parameters in the checkpoint.
    """
    wanted = model.state_entries()
    selected = checkpoint.entries if prefixes is None else checkpoint.filtered(prefixes)
    if prefixes is not None:
        missing = [name for name in wanted
                   if any(name.startswith(p) for p in prefixes) and name not in selected]
        if missing:
            raise LoadError(f"checkpoint is missing parameters: {sorted(missing)}")
    loaded, skipped = [], []
    for name, values in selected.items():
        if name not in wanted:
            skipped.append(name)
            continue
        dst = wanted[name]
        if dst.shape != values.shape:
            raise LoadError(
                f"parameter {name!r}: checkpoint shape {values.shape} != model shape {dst.shape}")
        dst[...] = values.astype(dst.dtype)
        loaded.append(name)
    if prefixes is None:
        missing = [name for name in wanted if name not in selected]
        if missing:
            raise LoadError(f"checkpoint is missing parameters: {sorted(missing)}")
    return loaded, skipped
