"""AdamW update arithmetic and the one-cycle schedule."""

import math

import numpy as np
import pytest

from spellerssl.autodiff import Parameter
from spellerssl.errors import ConfigurationError, StateError
from spellerssl.optim import AdamW, OneCycleSchedule, onecycle_lr


def make_param(values, grad=None):
    p = Parameter("p", np.asarray(values, dtype=np.float64))
    if grad is not None:
        p.grad[:] = grad
    return p


class TestAdamW:
    def test_first_step_moves_by_lr(self):
        p = make_param(np.zeros(3), grad=1.0)
        opt = AdamW([p], weight_decay=0.0)
        opt.step(0.01)
        assert np.allclose(p.data, -0.01, atol=1e-8)

    def test_zero_grad_zero_decay_is_identity(self):
        p = make_param([1.0, -2.0], grad=0.0)
        AdamW([p], weight_decay=0.0).step(0.1)
        assert np.allclose(p.data, [1.0, -2.0])

    def test_decoupled_decay_shrinks_without_gradient(self):
        p = make_param([1.0, -2.0], grad=0.0)
        AdamW([p], weight_decay=0.01).step(0.1)
        assert np.allclose(p.data, np.array([1.0, -2.0]) * (1.0 - 0.1 * 0.01))

    def test_step_counter_increments_by_one(self):
        p = make_param([1.0], grad=1.0)
        opt = AdamW([p])
        for expected in (1, 2, 3):
            opt.step(0.01)
            assert opt.state.step == expected

    def test_bit_determinism(self):
        def run():
            rng = np.random.default_rng(5)
            p = make_param(rng.normal(size=8))
            opt = AdamW([p])
            for i in range(20):
                p.grad[:] = rng.normal(size=8)
                opt.step(1e-3)
            return p.data.copy()
        a, b = run(), run()
        assert np.array_equal(a, b)

    def test_missing_gradient_raises(self):
        p = make_param([1.0])
        p.grad = None
        with pytest.raises(StateError, match="no gradient"):
            AdamW([p]).step(0.1)

    def test_moment_shapes_match(self):
        p = make_param(np.zeros((2, 3)), grad=1.0)
        opt = AdamW([p])
        assert opt.state.m["p"].shape == (2, 3)
        assert opt.state.v["p"].shape == (2, 3)


class TestOneCycle:
    def schedule(self, total=1000):
        return OneCycleSchedule(total_steps=total)

    def test_endpoints_exact(self):
        sched = self.schedule()
        assert onecycle_lr(sched, 0) == 2.5e-4
        assert onecycle_lr(sched, 100) == 5e-4
        assert onecycle_lr(sched, 1000) == 5e-6

    def test_out_of_range(self):
        sched = self.schedule()
        with pytest.raises(ConfigurationError):
            onecycle_lr(sched, -1)
        with pytest.raises(ConfigurationError):
            onecycle_lr(sched, 1001)

    def test_monotone_rise_then_fall(self):
        sched = self.schedule()
        values = [onecycle_lr(sched, t) for t in range(1001)]
        peak = int(np.argmax(values))
        assert peak == 100
        assert all(values[i] <= values[i + 1] + 1e-18 for i in range(peak))
        assert all(values[i] >= values[i + 1] - 1e-18 for i in range(peak, 1000))

    def test_continuity_bound_feasible_config(self):
        # The bound (lr_max - lr_final)*pi/total holds when the warmup rise
        # is shallow enough: (lr_max - lr_initial) <= 2*f*(lr_max - lr_final).
        sched = OneCycleSchedule(total_steps=1000, lr_initial=4.5e-4, lr_max=5e-4,
                                 lr_final=5e-6, warmup_fraction=0.1)
        bound = (sched.lr_max - sched.lr_final) * math.pi / sched.total_steps
        values = [onecycle_lr(sched, t) for t in range(1001)]
        steps = np.abs(np.diff(values))
        assert steps.max() <= bound * (1 + 1e-9)

    def test_continuity_analytic_bound_paper_defaults(self):
        # At the published defaults the warmup is steeper; the analytic
        # per-step bound is max of the two half-cosine peak slopes.
        sched = self.schedule()
        w = sched.warmup_steps
        bound = max((sched.lr_max - sched.lr_initial) * math.pi / (2 * w),
                    (sched.lr_max - sched.lr_final) * math.pi / (2 * (sched.total_steps - w)))
        values = [onecycle_lr(sched, t) for t in range(1001)]
        steps = np.abs(np.diff(values))
        assert steps.max() <= bound * (1 + 1e-9)

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            OneCycleSchedule(total_steps=0)
        with pytest.raises(ConfigurationError):
            OneCycleSchedule(total_steps=10, warmup_fraction=0.0)
        with pytest.raises(ConfigurationError):
            OneCycleSchedule(total_steps=10, lr_initial=6e-4)  # above lr_max
        with pytest.raises(ConfigurationError):
            OneCycleSchedule(total_steps=10, lr_final=3e-4)  # above lr_initial
