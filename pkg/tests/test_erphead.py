"""ERP-Head classifier contracts and the fine-tuning loop."""

import numpy as np
import pytest

from gradcheck import directional_fd_check
from spellerssl import autodiff as ad
from spellerssl.autodiff import Tensor
from spellerssl.data import synth_generate, SynthConfig
from spellerssl.erphead import (ErpHead, HeadConfig, decision_score, decision_scores,
                                finetune, head_forward, score_epochs)
from spellerssl.errors import LoadError, ShapeError
from spellerssl.optim import AdamW
from spellerssl.unet import UNet1d, UNetConfig, pretrain
from spellerssl.aggregation import blocks_from_epochs, build_training_set
from spellerssl.preprocessing import MaskSpec

RNG = np.random.default_rng(7)


def head(b=128, d=16, seed=0, dtype=np.float32):
    return ErpHead(HeadConfig(bottleneck_channels=b, hidden_width=d), seed=seed, dtype=dtype)


class TestHeadForward:
    def test_logits_shape(self):
        out = head().forward(Tensor(RNG.normal(size=(128, 10)).astype(np.float32)))
        assert out.data.shape == (2,)

    def test_single_timestep_is_valid(self):
        out = head().forward(Tensor(RNG.normal(size=(128, 1)).astype(np.float32)))
        assert out.data.shape == (2,)

    def test_batched(self):
        out = head().forward(Tensor(RNG.normal(size=(5, 128, 10)).astype(np.float32)))
        assert out.data.shape == (5, 2)

    def test_time_length_preserved_through_convs(self):
        # every conv in the head keeps T; the GAP sees the input length
        h = head(b=8, d=4)
        for t in (1, 5, 10, 32):
            x = ad.conv1d(Tensor(RNG.normal(size=(8, t)).astype(np.float32)),
                          h.params["head.proj.w"], h.params["head.proj.b"])
            assert x.data.shape[-1] == t
            dw = ad.conv1d(Tensor(RNG.normal(size=(4, t)).astype(np.float32)),
                           h.params["head.dw1.w"], h.params["head.dw1.b"],
                           padding=1, groups=4)
            assert dw.data.shape[-1] == t
            dil = ad.conv1d(Tensor(RNG.normal(size=(4, t)).astype(np.float32)),
                            h.params["head.dw2.w"], h.params["head.dw2.b"],
                            padding=2, dilation=2, groups=4)
            assert dil.data.shape[-1] == t
            logits = h.forward(Tensor(RNG.normal(size=(8, t)).astype(np.float32)))
            assert logits.data.shape == (2,)

    def test_zero_bottleneck_matches_bias_trace(self):
        h = head(b=6, d=3, seed=4)
        t = 5
        logits = h.forward(Tensor(np.zeros((6, t), dtype=np.float32))).data

        # independent numpy trace of the bias path through the zero input
        def gelu(v):
            return 0.5 * v * (1.0 + np.tanh(0.7978845608028654 * (v + 0.044715 * v ** 3)))
        x = np.zeros((3, t))
        x += h.params["head.proj.b"].data[:, None]
        rm, rv = h.buffers["head.bn.rm"], h.buffers["head.bn.rv"]
        x = (x - rm[:, None]) / np.sqrt(rv[:, None] + 1e-5)
        x = h.params["head.bn.g"].data[:, None] * x + h.params["head.bn.b"].data[:, None]
        x = gelu(x)
        for name, pad, dil in (("head.dw1", 1, 1), ("head.dw2", 2, 2)):
            w = h.params[f"{name}.w"].data
            b = h.params[f"{name}.b"].data
            xp = np.pad(x, ((0, 0), (pad, pad)))
            nxt = np.zeros_like(x)
            for ch in range(3):
                for pos in range(t):
                    taps = xp[ch, pos:pos + 2 * dil + 1:dil]
                    nxt[ch, pos] = np.dot(taps, w[ch, 0]) + b[ch]
            x = gelu(nxt)
        x = gelu(h.params["head.fuse.w"].data[:, :, 0] @ x + h.params["head.fuse.b"].data[:, None])
        pooled = x.mean(axis=1)
        expect = h.params["head.fc.w"].data @ pooled + h.params["head.fc.b"].data
        assert np.allclose(logits, expect, atol=1e-5)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            head(b=128).forward(Tensor(np.zeros((64, 10), dtype=np.float32)))

    def test_head_forward_alias(self):
        h = head()
        x = Tensor(RNG.normal(size=(128, 10)).astype(np.float32))
        assert np.array_equal(head_forward(h, x).data, h.forward(x).data)


class TestDecisionScore:
    def test_zero_logits(self):
        assert decision_score(Tensor([0.0, 0.0])) == 0.0

    def test_arithmetic(self):
        assert decision_score(Tensor([-1.0, 2.0])) == 3.0

    def test_monotone_in_target_logit(self):
        scores = [decision_score(Tensor([0.5, z])) for z in (0.0, 0.5, 1.0, 2.0)]
        assert all(a < b for a, b in zip(scores, scores[1:]))

    def test_constant_shift_invariance(self):
        base = decision_score(Tensor([0.3, 1.1]))
        shifted = decision_score(Tensor([0.3 + 5.0, 1.1 + 5.0]))
        assert abs(base - shifted) < 1e-6

    def test_vectorized_matches_scalar(self):
        logits = RNG.normal(size=(6, 2)).astype(np.float32)
        vec = decision_scores(Tensor(logits))
        scalars = [decision_score(Tensor(row)) for row in logits]
        assert np.allclose(vec, scalars)


class TestHeadGradients:
    def test_directional_finite_differences(self):
        h = head(b=8, d=16, seed=3, dtype=np.float64)
        x = Tensor(RNG.normal(size=(8, 10)), dtype=np.float64)
        labels = [1]
        params = h.parameters()

        def forward_scalar():
            logits = h.forward(x, training=False)
            return ad.weighted_cross_entropy(logits, labels, (1.0, 5.0)).item()

        h.zero_grad()
        ad.backward(ad.weighted_cross_entropy(h.forward(x, training=False), labels, (1.0, 5.0)))
        directional_fd_check(forward_scalar, params, [p.grad for p in params])


def tiny_dataset(seed=0, chars=4):
    cfg = SynthConfig(n_characters=chars, channels=2, n_repetitions=3,
                      epoch_length=32, p300_amplitude=2.0, noise_sigma=0.3,
                      p300_latency_s=0.05, p300_width_s=0.015, seed=seed)
    return synth_generate(cfg)


def tiny_models(seed=0):
    unet = UNet1d(UNetConfig(in_channels=2, width_multiplier=1 / 32), seed=seed)
    return unet, ErpHead(HeadConfig(unet.cfg.bottleneck_channels, 8), seed=seed + 1)


class TestFinetune:
    def test_checkpoint_load_contract(self):
        data = tiny_dataset()
        unet, h = tiny_models(seed=2)
        ckpt, _ = pretrain(unet, data.data, epochs=1, batch_size=32,
                           mask=MaskSpec(block_length=4, seed=0), seed=1)
        fresh, h2 = tiny_models(seed=9)
        trainset = build_training_set(blocks_from_epochs(data), 1)
        finetune(fresh, h2, trainset, checkpoint=ckpt, epochs=0, seed=5)
        for name in fresh.params:
            if name.startswith(("enc.", "bottleneck.")):
                assert np.array_equal(fresh.params[name].data, ckpt.entries[name]), name
        for name in fresh.buffers:
            if name.startswith(("enc.", "bottleneck.")):
                assert np.array_equal(fresh.buffers[name], ckpt.entries[name]), name
        # decoder weights keep their fresh initialization
        assert not np.array_equal(fresh.params["dec.1.conv1.w"].data,
                                  ckpt.entries["dec.1.conv1.w"])

    def test_missing_encoder_entries_raise_with_names(self):
        data = tiny_dataset()
        unet, h = tiny_models(seed=3)
        ckpt, _ = pretrain(unet, data.data, epochs=1, batch_size=32,
                           mask=MaskSpec(block_length=4, seed=0), seed=1)
        del ckpt.entries["enc.1.conv1.w"]
        trainset = build_training_set(blocks_from_epochs(data), 1)
        fresh, h2 = tiny_models(seed=4)
        with pytest.raises(LoadError, match="enc.1.conv1.w"):
            finetune(fresh, h2, trainset, checkpoint=ckpt, epochs=0)

    def test_step_accounting(self):
        data = tiny_dataset(chars=5)
        trainset = build_training_set(blocks_from_epochs(data), 1)
        unet, h = tiny_models(seed=6)
        _, log = finetune(unet, h, trainset, epochs=2, batch_size=64, seed=7)
        n = trainset.n_trials
        assert len(log) == 2 * ((n + 63) // 64)

    def test_freeze_encoder_keeps_encoder_bitwise(self):
        data = tiny_dataset(chars=3)
        trainset = build_training_set(blocks_from_epochs(data), 1)
        unet, h = tiny_models(seed=8)
        before_params = {k: p.data.copy() for k, p in unet.params.items()}
        before_buffers = {k: v.copy() for k, v in unet.buffers.items()}
        finetune(unet, h, trainset, epochs=1, freeze_encoder=True, seed=9)
        for k, v in before_params.items():
            assert np.array_equal(unet.params[k].data, v), k
        for k, v in before_buffers.items():
            assert np.array_equal(unet.buffers[k], v), k

    def test_joint_finetune_updates_encoder(self):
        data = tiny_dataset(chars=3)
        trainset = build_training_set(blocks_from_epochs(data), 1)
        unet, h = tiny_models(seed=10)
        before = unet.params["enc.1.conv1.w"].data.copy()
        finetune(unet, h, trainset, epochs=1, seed=11)
        assert not np.array_equal(unet.params["enc.1.conv1.w"].data, before)

    def test_separable_bottlenecks_reach_95_percent(self):
        # linearly separable class means, trained head-only
        rng = np.random.default_rng(0)
        n = 128
        labels = rng.integers(0, 2, size=n)
        feats = rng.normal(scale=0.3, size=(n, 8, 10)).astype(np.float32)
        feats[labels == 1] += 1.5
        h = head(b=8, d=8, seed=12)
        opt = AdamW(h.parameters(), weight_decay=0.0)
        for epoch in range(10):
            order = rng.permutation(n)
            for start in range(0, n, 32):
                idx = order[start:start + 32]
                logits = h.forward(Tensor(feats[idx]), training=True)
                loss = ad.weighted_cross_entropy(logits, labels[idx], (1.0, 1.0))
                opt.zero_grad()
                ad.backward(loss)
                opt.step(3e-3)
        logits = h.forward(Tensor(feats), training=False)
        acc = np.mean(np.argmax(logits.data, axis=1) == labels)
        assert acc > 0.95

    def test_score_epochs_matches_forward(self):
        data = tiny_dataset(chars=2)
        unet, h = tiny_models(seed=13)
        scores = score_epochs(unet, h, data.data[:5])
        for i in range(5):
            logits = h.forward(unet.encode(Tensor(data.data[i])))
            assert abs(scores[i] - decision_score(logits)) < 1e-5
