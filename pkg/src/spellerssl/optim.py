"""AdamW with decoupled weight decay, and the one-cycle cosine schedule."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StateError


@dataclass
class AdamWState:
    """Per-parameter moment buffers plus the shared step counter."""
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


class AdamW:
    """Decoupled-weight-decay Adam over a fixed parameter list.

    The decay multiplies each parameter by (1 - lr*wd) before the
    adaptive update, so a zero-gradient parameter still shrinks.
    """

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=1e-2):
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise StateError("duplicate parameter names in optimizer")
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.state = AdamWState()
        for p in self.params:
            self.state.m[p.name] = np.zeros_like(p.data)
            self.state.v[p.name] = np.zeros_like(p.data)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self, lr: float):
        lr = float(lr)
        self.state.step += 1
        t = self.state.step
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p in self.params:
            if p.grad is None:
                raise StateError(f"parameter {p.name!r} has no gradient")
            g = p.grad
            if self.weight_decay:
                p.data *= 1.0 - lr * self.weight_decay
            m = self.state.m[p.name]
            v = self.state.v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass(frozen=True)
class OneCycleSchedule:
    """Cosine warmup from lr_initial to lr_max over the first
    warmup_fraction of steps, then cosine decay to lr_final."""
    total_steps: int
    lr_initial: float = 2.5e-4
    lr_max: float = 5e-4
    lr_final: float = 5e-6
    warmup_fraction: float = 0.1

    def __post_init__(self):
        if self.total_steps < 1:
            raise ConfigurationError(f"total_steps must be >= 1, got {self.total_steps}")
        if not (0.0 < self.warmup_fraction < 1.0):
            raise ConfigurationError(f"warmup_fraction must lie in (0, 1), got {self.warmup_fraction}")
        if min(self.lr_initial, self.lr_max, self.lr_final) <= 0.0:
            raise ConfigurationError("learning rates must be positive")
        if self.lr_initial > self.lr_max:
            raise ConfigurationError(f"lr_initial {self.lr_initial} > lr_max {self.lr_max}")
        if self.lr_final > self.lr_initial:
            raise ConfigurationError(f"lr_final {self.lr_final} > lr_initial {self.lr_initial}")

    @property
    def warmup_steps(self) -> int:
        return min(max(1, round(self.warmup_fraction * self.total_steps)), self.total_steps)


def onecycle_lr(schedule: OneCycleSchedule, step: int) -> float:
    """Learning rate at an integer step in [0, total_steps]."""
    if not 0 <= step <= schedule.total_steps:
        raise ConfigurationError(
            f"step {step} outside [0, {schedule.total_steps}]")
    w = schedule.warmup_steps
    if step <= w:
        frac = 0.5 * (1.0 - math.cos(math.pi * step / w))
        return schedule.lr_initial + (schedule.lr_max - schedule.lr_initial) * frac
    span = schedule.total_steps - w
    frac = 0.5 * (1.0 + math.cos(math.pi * (step - w) / span))
    return schedule.lr_final + (schedule.lr_max - schedule.lr_final) * frac
