"""Lightweight temporal-convolution classifier over the U-Net bottleneck
sequence, and the supervised fine-tuning loop.

Head layout: 1x1 projection (with batchnorm), depthwise k3, dilated
depthwise k3 (dilation 2), 1x1 fusion — all GELU, all length-preserving —
then global average pooling over time and an affine map to the two
class logits (non-target, target).
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import EpochSet, ModelCheckpoint, apply_checkpoint, config_hash
from .errors import ConfigurationError, NumericError, ShapeError
from .nnbase import Model
from .optim import AdamW
from .unet import UNet1d


@dataclass(frozen=True)
class HeadConfig:
    bottleneck_channels: int
    hidden_width: int = 128

    def __post_init__(self):
        if self.bottleneck_channels < 1 or self.hidden_width < 1:
            raise ConfigurationError("channel widths must be >= 1")


class ErpHead(Model):
    """All parameter names carry the head. prefix."""

    def __init__(self, config: HeadConfig, seed: int = 0, dtype=np.float32):
        super().__init__(seed=seed, dtype=dtype)
        self.cfg = config
        d = config.hidden_width
        self.add_conv("head.proj", d, config.bottleneck_channels, 1)
        self.add_batchnorm("head.bn", d)
        self.add_conv("head.dw1", d, 1, 3)
        self.add_conv("head.dw2", d, 1, 3)
        self.add_conv("head.fuse", d, d, 1)
        self.add_linear("head.fc", 2, d)

    def config(self) -> dict:
        return {"kind": "erphead", "bottleneck_channels": self.cfg.bottleneck_channels,
                "hidden_width": self.cfg.hidden_width}

    def forward_cm(self, b: Tensor, training: bool = False) -> Tensor:
        """Channel-major bottleneck (B, N, T) -> logits (N, 2)."""
        if b.data.shape[0] != self.cfg.bottleneck_channels:
            raise ShapeError(
                f"expected {self.cfg.bottleneck_channels} bottleneck channels, got {b.data.shape[0]}")
        d = self.cfg.hidden_width
        mode = "train" if training else "eval"
        x = ad.conv1d_cm(b, self.params["head.proj.w"], self.params["head.proj.b"])
        x = ad.batchnorm1d_cm(x, self.params["head.bn.g"], self.params["head.bn.b"],
                              self.buffers["head.bn.rm"], self.buffers["head.bn.rv"], mode)
        x = ad.activation(x, "gelu")
        x = ad.conv1d_cm(x, self.params["head.dw1.w"], self.params["head.dw1.b"],
                         padding=1, groups=d)
        x = ad.activation(x, "gelu")
        x = ad.conv1d_cm(x, self.params["head.dw2.w"], self.params["head.dw2.b"],
                         padding=2, dilation=2, groups=d)
        x = ad.activation(x, "gelu")
        x = ad.conv1d_cm(x, self.params["head.fuse.w"], self.params["head.fuse.b"])
        x = ad.activation(x, "gelu")
        pooled = ad.global_avg_pool_time_cm(x)  # (N, D)
        return ad.linear(pooled, self.params["head.fc.w"], self.params["head.fc.b"])

    def forward(self, b: Tensor, training: bool = False) -> Tensor:
        """Bottleneck (B, T) or (N, B, T) -> logits (2,) or (N, 2)."""
        if b.data.ndim == 2:
            logits = self.forward_cm(ad.expand_dim(b, 1), training=training)
            return ad.squeeze_dim(logits, 0)
        if b.data.ndim == 3:
            return self.forward_cm(ad.swap_batch_channel(b), training=training)
        raise ShapeError(f"expected (B, T) or (N, B, T), got shape {b.data.shape}")


def head_forward(head: ErpHead, b: Tensor, training: bool = False) -> Tensor:
    return head.forward(b, training=training)


def decision_score(logits) -> float:
    """Log-odds of the target class: logit(target) - logit(non-target)."""
    arr = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    if arr.shape != (2,):
        raise ShapeError(f"expected 2 logits, got shape {arr.shape}")
    return float(arr[1] - arr[0])


def decision_scores(logits_batch) -> np.ndarray:
    """Vectorized decision_score over (N, 2) logits."""
    arr = logits_batch.data if isinstance(logits_batch, Tensor) else np.asarray(logits_batch)
    return (arr[:, 1] - arr[:, 0]).astype(np.float64)


def score_epochs(unet: UNet1d, head: ErpHead, data: np.ndarray,
                 batch_size: int = 256) -> np.ndarray:
    """Decision scores of raw trials (n, C, L) under frozen models."""
    scores = np.empty(data.shape[0], dtype=np.float64)
    for start in range(0, data.shape[0], batch_size):
        batch = data[start:start + batch_size].astype(np.float32)
        x_cm = Tensor(np.ascontiguousarray(batch.transpose(1, 0, 2)))
        logits = head.forward_cm(unet.encode_cm(x_cm, training=False), training=False)
        scores[start:start + batch.shape[0]] = decision_scores(logits)
    return scores


def finetune(unet: UNet1d, head: ErpHead, trainset: EpochSet, *,
             checkpoint: ModelCheckpoint | None = None, epochs: int = 10,
             batch_size: int = 64, class_weights=(1.0, 5.0), lr: float = 1e-4,
             weight_decay: float = 1e-2, freeze_encoder: bool = False,
             seed: int = 0) -> tuple[ModelCheckpoint, list]:
    """Supervised training of encoder + head on labeled trials.

    When a pretraining checkpoint is given, encoder weights up to the
    bottleneck are restored first (the decoder is ignored); without one
    the randomly initialized weights train from scratch. The minority
    (target) class carries the larger weight. With freeze_encoder only
    head parameters update and the encoder runs in eval mode.
    """
    if trainset.n_trials == 0:
        raise ConfigurationError("empty training set")
    if checkpoint is not None:
        apply_checkpoint(unet, checkpoint, prefixes=("enc.", "bottleneck."))

    if freeze_encoder:
        params = head.parameters()
    else:
        params = unet.parameters(prefixes=("enc.", "bottleneck.")) + head.parameters()
    opt = AdamW(params, weight_decay=weight_decay)
    rng = np.random.default_rng(np.random.PCG64(seed))
    n = trainset.n_trials
    data = trainset.data
    labels = trainset.labels
    log = []
    step = 0
    bad_steps = 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        correct = 0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            x_cm = Tensor(np.ascontiguousarray(data[idx].astype(np.float32).transpose(1, 0, 2)))
            y = labels[idx]
            bott = unet.encode_cm(x_cm, training=not freeze_encoder)
            logits = head.forward_cm(bott, training=True)
            loss = ad.weighted_cross_entropy(logits, y, class_weights)
            opt.zero_grad()
            ad.backward(loss)
            opt.step(lr)
            loss_val = loss.item()
            bad_steps = bad_steps + 1 if not np.isfinite(loss_val) else 0
            if bad_steps >= 3:
                raise NumericError(f"non-finite loss for {bad_steps} consecutive steps")
            correct += int(np.sum(np.argmax(logits.data, axis=1) == y))
            log.append({"epoch": epoch + 1, "step": step, "lr": lr, "loss": loss_val})
            step += 1
        log[-1]["train_accuracy"] = 100.0 * correct / n
    merged = {}
    merged.update(unet.state_entries())
    merged.update(head.state_entries())
    entries = {name: arr.astype(np.float32).copy() for name, arr in merged.items()}
    ckpt = ModelCheckpoint(entries,
                           config_hash=config_hash({"unet": unet.config(), "head": head.config()}),
                           training_step=step, seed=seed)
    return ckpt, log
