"""Shared model plumbing: named parameter/buffer registry, seeded
initialization, and checkpoint conversion."""

import numpy as np

from .autodiff import Parameter
from .data import ModelCheckpoint, config_hash


class Model:
    """Container of named Parameters and non-trainable buffers."""

    def __init__(self, seed: int = 0, dtype=np.float32):
        self.params = {}
        self.buffers = {}
        self.dtype = np.dtype(dtype)
        self.seed = int(seed)
        self._rng = np.random.default_rng(np.random.PCG64(seed))

    # -- registration ------------------------------------------------------

    def _uniform(self, shape, bound: float) -> np.ndarray:
        return self._rng.uniform(-bound, bound, size=shape).astype(self.dtype)

    def add_conv(self, name: str, cout: int, cin_per_group: int, k: int):
        bound = 1.0 / np.sqrt(cin_per_group * k)
        self.params[f"{name}.w"] = Parameter(f"{name}.w", self._uniform((cout, cin_per_group, k), bound))
        self.params[f"{name}.b"] = Parameter(f"{name}.b", self._uniform((cout,), bound))

    def add_tconv(self, name: str, cin: int, cout: int, k: int):
        bound = 1.0 / np.sqrt(cin * k)
        self.params[f"{name}.w"] = Parameter(f"{name}.w", self._uniform((cin, cout, k), bound))
        self.params[f"{name}.b"] = Parameter(f"{name}.b", self._uniform((cout,), bound))

    def add_batchnorm(self, name: str, channels: int):
        self.params[f"{name}.g"] = Parameter(f"{name}.g", np.ones(channels, dtype=self.dtype))
        self.params[f"{name}.b"] = Parameter(f"{name}.b", np.zeros(channels, dtype=self.dtype))
        self.buffers[f"{name}.rm"] = np.zeros(channels, dtype=self.dtype)
        self.buffers[f"{name}.rv"] = np.ones(channels, dtype=self.dtype)

    def add_linear(self, name: str, out_features: int, in_features: int):
        bound = 1.0 / np.sqrt(in_features)
        self.params[f"{name}.w"] = Parameter(f"{name}.w", self._uniform((out_features, in_features), bound))
        self.params[f"{name}.b"] = Parameter(f"{name}.b", self._uniform((out_features,), bound))

    # -- access ------------------------------------------------------------

    def parameters(self, prefixes=None):
        if prefixes is None:
            return list(self.params.values())
        return [p for name, p in self.params.items()
                if any(name.startswith(pre) for pre in prefixes)]

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def state_entries(self) -> dict:
        """name -> ndarray view over parameters and buffers."""
        entries = {name: p.data for name, p in self.params.items()}
        entries.update(self.buffers)
        return entries

    def config(self) -> dict:
        raise NotImplementedError

    def to_checkpoint(self, training_step: int = 0, seed: int | None = None) -> ModelCheckpoint:
        entries = {name: arr.astype(np.float32).copy() for name, arr in self.state_entries().items()}
        return ModelCheckpoint(entries, config_hash=config_hash(self.config()),
                               training_step=int(training_step),
                               seed=self.seed if seed is None else int(seed))
