"""1D U-Net backbone: four double-conv encoder stages with 2x max
pooling, a double-conv bottleneck, a mirrored decoder with concatenated
skip connections, and a 1x1 output head. Also hosts the masked
time/frequency reconstruction objective and the pretraining loop.

The channel ladder is base_width * {1, 2, 4, 8, 16} scaled by
width_multiplier (rounded, floor 1), so the published geometry
(64 -> 1024 bottleneck) and desk-scale shrunk variants share one code
path. Inputs must have a time length divisible by 16 (four stride-2
poolings); use preprocessing.pad_time_to_multiple first.

Internally activations are channel-major (C, batch, L); the public
forward/encode accept the conventional (C, L) or (N, C, L) layouts.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import ModelCheckpoint
from .errors import ConfigurationError, NumericError, ShapeError
from .nnbase import Model
from .optim import AdamW, OneCycleSchedule, onecycle_lr
from .preprocessing import MaskSpec, mask_time


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int
    base_width: int = 64
    depth: int = 4
    width_multiplier: float = 1.0

    def __post_init__(self):
        if self.in_channels < 1 or self.base_width < 1:
            raise ConfigurationError("in_channels and base_width must be >= 1")
        if self.depth != 4:
            raise ConfigurationError("only depth 4 is supported (time ladder L .. L/16)")
        if self.width_multiplier <= 0:
            raise ConfigurationError("width_multiplier must be positive")

    @property
    def widths(self) -> tuple:
        return tuple(max(1, round(self.base_width * self.width_multiplier * 2 ** i))
                     for i in range(self.depth + 1))

    @property
    def bottleneck_channels(self) -> int:
        return self.widths[-1]


@dataclass
class UNetOutput:
    reconstruction: Tensor   # same shape as the (padded) input
    bottleneck: Tensor       # (B, L/16) or (N, B, L/16)


class UNet1d(Model):
    """Parameter names partition into enc. / bottleneck. / dec. / final. groups."""

    def __init__(self, config: UNetConfig, seed: int = 0, dtype=np.float32):
        super().__init__(seed=seed, dtype=dtype)
        self.cfg = config
        w = config.widths
        cin = config.in_channels
        for i in range(4):
            self._add_double_conv(f"enc.{i + 1}", cin, w[i])
            cin = w[i]
        self._add_double_conv("bottleneck", w[3], w[4])
        for i in range(4, 0, -1):
            self.add_tconv(f"dec.{i}.up", w[i], w[i - 1], 2)
            self._add_double_conv(f"dec.{i}", 2 * w[i - 1], w[i - 1])
        self.add_conv("final", config.in_channels, w[0], 1)

    def config(self) -> dict:
        return {"kind": "unet1d", "in_channels": self.cfg.in_channels,
                "base_width": self.cfg.base_width, "depth": self.cfg.depth,
                "width_multiplier": self.cfg.width_multiplier}

    def _add_double_conv(self, prefix: str, cin: int, cout: int):
        self.add_conv(f"{prefix}.conv1", cout, cin, 3)
        self.add_batchnorm(f"{prefix}.bn1", cout)
        self.add_conv(f"{prefix}.conv2", cout, cout, 3)
        self.add_batchnorm(f"{prefix}.bn2", cout)

    def _double_conv(self, prefix: str, x: Tensor, training: bool) -> Tensor:
        mode = "train" if training else "eval"
        for i in (1, 2):
            x = ad.conv1d_cm(x, self.params[f"{prefix}.conv{i}.w"],
                             self.params[f"{prefix}.conv{i}.b"], padding=1)
            x = ad.batchnorm1d_cm(x, self.params[f"{prefix}.bn{i}.g"],
                                  self.params[f"{prefix}.bn{i}.b"],
                                  self.buffers[f"{prefix}.bn{i}.rm"],
                                  self.buffers[f"{prefix}.bn{i}.rv"], mode)
            x = ad.activation(x, "relu")
        return x

    def _to_cm(self, x: Tensor) -> tuple[Tensor, bool]:
        if x.data.ndim == 2:
            xcm, squeeze = ad.expand_dim(x, 1), True
        elif x.data.ndim == 3:
            xcm, squeeze = ad.swap_batch_channel(x), False
        else:
            raise ShapeError(f"expected (C, L) or (N, C, L), got shape {x.data.shape}")
        self._check_cm(xcm)
        return xcm, squeeze

    def _check_cm(self, xcm: Tensor):
        length = xcm.data.shape[-1]
        if length % 16 != 0:
            raise ShapeError(
                f"time length {length} is not a multiple of 16; "
                "apply preprocessing.pad_time_to_multiple first")
        if xcm.data.shape[0] != self.cfg.in_channels:
            raise ShapeError(f"expected {self.cfg.in_channels} channels, got {xcm.data.shape[0]}")

    def _encode_cm(self, x: Tensor, training: bool):
        skips = []
        h = x
        for i in range(1, 5):
            h = self._double_conv(f"enc.{i}", h, training)
            skips.append(h)
            h = ad.maxpool1d_cm(h, 2, 2)
        return self._double_conv("bottleneck", h, training), skips

    def forward_cm(self, x: Tensor, training: bool = False) -> UNetOutput:
        """Channel-major (C, N, L) full pass; used by the training loops."""
        self._check_cm(x)
        bott, skips = self._encode_cm(x, training)
        h = bott
        for i in range(4, 0, -1):
            h = ad.transposed_conv1d_cm(h, self.params[f"dec.{i}.up.w"],
                                        self.params[f"dec.{i}.up.b"], stride=2)
            h = ad.concat([h, skips[i - 1]], axis=0)
            h = self._double_conv(f"dec.{i}", h, training)
        recon = ad.conv1d_cm(h, self.params["final.w"], self.params["final.b"])
        return UNetOutput(recon, bott)

    def encode_cm(self, x: Tensor, training: bool = False) -> Tensor:
        self._check_cm(x)
        bott, _ = self._encode_cm(x, training)
        return bott

    def forward(self, x: Tensor, training: bool = False) -> UNetOutput:
        """Full reconstruction pass; also returns the bottleneck sequence."""
        xcm, squeeze = self._to_cm(x)
        out = self.forward_cm(xcm, training=training)
        return UNetOutput(_from_cm(out.reconstruction, squeeze),
                          _from_cm(out.bottleneck, squeeze))

    def encode(self, x: Tensor, training: bool = False) -> Tensor:
        """Encoder + bottleneck only (the downstream feature path)."""
        xcm, squeeze = self._to_cm(x)
        return _from_cm(self.encode_cm(xcm, training=training), squeeze)


def _from_cm(t: Tensor, squeeze: bool) -> Tensor:
    return ad.squeeze_dim(t, 1) if squeeze else ad.swap_batch_channel(t)


def build_unet(config: UNetConfig, seed: int = 0, dtype=np.float32) -> UNet1d:
    return UNet1d(config, seed=seed, dtype=dtype)


def unet_forward(model: UNet1d, x: Tensor, training: bool = False) -> UNetOutput:
    return model.forward(x, training=training)


def encoder_forward(model: UNet1d, x: Tensor, training: bool = False) -> Tensor:
    return model.encode(x, training=training)


# ---------------------------------------------------------------------------
# reconstruction objective
# ---------------------------------------------------------------------------

def ssl_loss_terms(x: Tensor, recon: Tensor, lam: float = 1.0):
    """(total, time_term, freq_term): mean L1 in time plus lam times the
    mean L1 over real and imaginary DFT parts along time."""
    time_term = ad.l1_loss(x, recon)
    xr, xi = ad.dft(x)
    rr, ri = ad.dft(recon)
    freq_term = ad.scale(ad.add(ad.l1_loss(xr, rr), ad.l1_loss(xi, ri)), 0.5)
    total = ad.add(time_term, ad.scale(freq_term, lam)) if lam != 0.0 else time_term
    return total, time_term, freq_term


def ssl_loss(x: Tensor, recon: Tensor, lam: float = 1.0) -> Tensor:
    return ssl_loss_terms(x, recon, lam)[0]


def reconstruction_mse(model: UNet1d, trials: np.ndarray, mask: MaskSpec | None = None,
                       seed: int = 0, batch_size: int = 64) -> float:
    """Mean squared reconstruction error over trials (eval mode). When a
    MaskSpec is given, inputs are masked exactly as in pretraining."""
    rng = np.random.default_rng(np.random.PCG64(seed))
    total = 0.0
    count = 0
    for start in range(0, trials.shape[0], batch_size):
        batch = trials[start:start + batch_size].astype(np.float32)
        inputs = batch
        if mask is not None:
            inputs = np.stack([
                mask_time(t, MaskSpec(mask.time_mask_ratio, mask.channel_mask_ratio,
                                      mask.block_length, int(rng.integers(2 ** 62))))[0]
                for t in batch])
        x_cm = Tensor(np.ascontiguousarray(inputs.transpose(1, 0, 2)))
        out = model.forward_cm(x_cm, training=False)
        total += float(np.sum((out.reconstruction.data
                               - batch.transpose(1, 0, 2)) ** 2))
        count += batch.size
    return total / count


# ---------------------------------------------------------------------------
# pretraining loop
# ---------------------------------------------------------------------------

def pretrain(model: UNet1d, trials: np.ndarray, *, epochs: int = 200, batch_size: int = 64,
             mask: MaskSpec = MaskSpec(), lam: float = 1.0,
             lr_initial: float = 2.5e-4, lr_max: float = 5e-4, lr_final: float = 5e-6,
             warmup_fraction: float = 0.1, weight_decay: float = 1e-2,
             seed: int = 0) -> tuple[ModelCheckpoint, list]:
    """Masked-reconstruction training over (n_trials, C, L) data.

    Each step masks its batch, reconstructs, and applies the combined
    time/frequency L1 loss against the unmasked originals under AdamW
    with the one-cycle schedule. Returns the final checkpoint and one
    log row (epoch, step, lr, time_loss, freq_loss, total) per step.
    """
    trials = np.asarray(trials, dtype=np.float32)
    if trials.ndim != 3 or trials.shape[0] == 0:
        raise ConfigurationError("pretraining needs a non-empty (n, C, L) trial array")
    if trials.shape[-1] % 16 != 0:
        raise ShapeError("trial length must be a multiple of 16; pad first")
    n = trials.shape[0]
    steps_per_epoch = -(-n // batch_size)
    n_steps = epochs * steps_per_epoch
    schedule = OneCycleSchedule(total_steps=max(1, n_steps - 1), lr_initial=lr_initial,
                                lr_max=lr_max, lr_final=lr_final,
                                warmup_fraction=warmup_fraction)
    opt = AdamW(model.parameters(), weight_decay=weight_decay)
    rng = np.random.default_rng(np.random.PCG64(seed))
    log = []
    step = 0
    bad_steps = 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = trials[order[start:start + batch_size]]
            masked = np.stack([
                mask_time(t, MaskSpec(mask.time_mask_ratio, mask.channel_mask_ratio,
                                      mask.block_length, int(rng.integers(2 ** 62))))[0]
                for t in batch])
            lr = onecycle_lr(schedule, min(step, schedule.total_steps))
            x = Tensor(np.ascontiguousarray(batch.transpose(1, 0, 2)))
            out = model.forward_cm(Tensor(np.ascontiguousarray(masked.transpose(1, 0, 2))),
                                   training=True)
            total, time_term, freq_term = ssl_loss_terms(x, out.reconstruction, lam)
            opt.zero_grad()
            ad.backward(total)
            opt.step(lr)
            loss_val = total.item()
            bad_steps = bad_steps + 1 if not np.isfinite(loss_val) else 0
            if bad_steps >= 3:
                raise NumericError(f"non-finite loss for {bad_steps} consecutive steps")
            log.append({"epoch": epoch + 1, "step": step, "lr": lr,
                        "time_loss": time_term.item(), "freq_loss": freq_term.item(),
                        "total": loss_val})
            step += 1
    return model.to_checkpoint(training_step=step, seed=seed), log
