"""Reverse-mode autodiff over numpy arrays.

A Tensor wraps a float32 array (float64 is supported for gradient
checking) together with an optional gradient buffer and a backward
closure recorded when an operation sees a differentiable input.

Layer primitives accept the conventional layouts — ``(C, L)`` /
``(N, C, L)`` for convolutions, ``(D,)`` / ``(N, D)`` for affine maps —
and delegate to channel-major kernels (``*_cm``, batch axis second)
that turn each convolution into a single GEMM over contiguous window
gathers. Models keep activations channel-major end to end and pay one
axis swap per step; the public wrappers swap on entry and exit.
"""

import numpy as np

from . import fourier
from .errors import ConfigurationError, LabelError, ShapeError

_FLOAT_DTYPES = (np.float32, np.float64)


class Tensor:
    """N-dimensional value with an optional gradient and tape entry."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        # ascontiguousarray would promote 0-d scalars to shape (1,)
        self.data = arr if arr.ndim == 0 else np.ascontiguousarray(arr)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar, got shape {self.data.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)


class Parameter(Tensor):
    """Named trainable tensor; the gradient buffer always exists."""

    __slots__ = ("name",)

    def __init__(self, name: str, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
    else:
        t.grad += g


def _result(data: np.ndarray, parents, backward):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def backward(loss: Tensor):
    """Populate .grad on every tensor the scalar `loss` depends on.

    Repeated calls accumulate; callers zero parameter grads between
    optimizer steps.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return

    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    _accumulate(loss, np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# elementwise / reduction / layout primitives
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add shapes differ: {a.data.shape} vs {b.data.shape}")
    def back(g):
        _accumulate(a, g)
        _accumulate(b, g)
    return _result(a.data + b.data, (a, b), back)


def scale(a: Tensor, alpha: float) -> Tensor:
    alpha = float(alpha)
    def back(g):
        _accumulate(a, g * alpha)
    return _result(a.data * alpha, (a,), back)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul shapes differ: {a.data.shape} vs {b.data.shape}")
    def back(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)
    return _result(a.data * b.data, (a, b), back)


def sum_all(a: Tensor) -> Tensor:
    def back(g):
        _accumulate(a, np.broadcast_to(g, a.data.shape).astype(a.data.dtype))
    return _result(np.sum(a.data, keepdims=False), (a,), back)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    def back(g):
        _accumulate(a, np.full_like(a.data, float(np.asarray(g).reshape(())) / n))
    return _result(np.mean(a.data), (a,), back)


def concat(tensors, axis: int) -> Tensor:
    datas = [t.data for t in tensors]
    sizes = [d.shape[axis] for d in datas]
    splits = np.cumsum(sizes)[:-1]
    def back(g):
        for t, gpart in zip(tensors, np.split(g, splits, axis=axis)):
            _accumulate(t, gpart)
    return _result(np.concatenate(datas, axis=axis), tuple(tensors), back)


def activation(x: Tensor, kind: str) -> Tensor:
    """Elementwise nonlinearity: 'relu' or 'gelu' (tanh approximation)."""
    if kind == "relu":
        out = np.maximum(x.data, 0)
        def back(g):
            _accumulate(x, g * (x.data > 0))
        return _result(out, (x,), back)
    if kind == "gelu":
        c = 0.7978845608028654  # sqrt(2/pi)
        a = 0.044715
        u = c * (x.data + a * x.data ** 3)
        t = np.tanh(u)
        out = 0.5 * x.data * (1.0 + t)
        def back(g):
            du = c * (1.0 + 3.0 * a * x.data ** 2)
            local = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t ** 2) * du
            _accumulate(x, (g * local).astype(x.data.dtype))
        return _result(out.astype(x.data.dtype), (x,), back)
    raise ValueError(f"unknown activation kind: {kind!r}")


def swap_batch_channel(x: Tensor) -> Tensor:
    """(N, C, L) <-> (C, N, L); its own inverse."""
    if x.data.ndim != 3:
        raise ShapeError(f"expected a 3-d tensor, got shape {x.data.shape}")
    def back(g):
        _accumulate(x, np.ascontiguousarray(g.transpose(1, 0, 2)))
    return _result(np.ascontiguousarray(x.data.transpose(1, 0, 2)), (x,), back)


def expand_dim(x: Tensor, axis: int) -> Tensor:
    def back(g):
        _accumulate(x, np.squeeze(g, axis=axis))
    return _result(np.expand_dims(x.data, axis), (x,), back)


def squeeze_dim(x: Tensor, axis: int) -> Tensor:
    if x.data.shape[axis] != 1:
        raise ShapeError(f"cannot squeeze axis {axis} of shape {x.data.shape}")
    def back(g):
        _accumulate(x, np.expand_dims(g, axis))
    return _result(np.squeeze(x.data, axis=axis), (x,), back)


def transpose2d(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise ShapeError(f"expected a 2-d tensor, got shape {x.data.shape}")
    def back(g):
        _accumulate(x, np.ascontiguousarray(g.T))
    return _result(np.ascontiguousarray(x.data.T), (x,), back)


# ---------------------------------------------------------------------------
# channel-major convolution kernels (activations are (C, N, L))
# ---------------------------------------------------------------------------

def conv1d_cm(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0,
              dilation: int = 1, groups: int = 1) -> Tensor:
    """Cross-correlation over (Cin, N, L) input; weights (Cout, Cin/groups, K)."""
    cin, n, length = x.data.shape
    cout, cin_g, k = w.data.shape
    if cin % groups != 0 or cout % groups != 0:
        raise ShapeError(f"channels ({cin} in, {cout} out) not divisible by groups={groups}")
    if cin_g != cin // groups:
        raise ShapeError(f"weight expects {cin_g} input channels per group, input has {cin // groups}")
    if b.data.shape != (cout,):
        raise ShapeError(f"bias shape {b.data.shape} does not match Cout={cout}")
    out_len = (length + 2 * padding - dilation * (k - 1) - 1) // stride + 1
    if out_len < 1:
        raise ShapeError(f"conv1d output length {out_len} < 1 for L={length}, K={k}, "
                         f"stride={stride}, padding={padding}, dilation={dilation}")

    if padding:
        xp = np.zeros((cin, n, length + 2 * padding), dtype=x.data.dtype)
        xp[:, :, padding:padding + length] = x.data
    else:
        xp = x.data
    cols = np.empty((cin, k, n, out_len), dtype=xp.dtype)
    for tap in range(k):
        start = tap * dilation
        stop = start + (out_len - 1) * stride + 1
        cols[:, tap] = xp[:, :, start:stop:stride]

    og = cout // groups
    if groups == 1:
        cols2 = cols.reshape(cin * k, n * out_len)
        out = (w.data.reshape(cout, cin * k) @ cols2).reshape(cout, n, out_len)
    else:
        cols2 = cols.reshape(groups, cin_g * k, n * out_len)
        w_g = w.data.reshape(groups, og, cin_g * k)
        out = np.matmul(w_g, cols2).reshape(cout, n, out_len)
    out += b.data[:, None, None]

    def back(g):
        if b.requires_grad:
            _accumulate(b, g.sum(axis=(1, 2)))
        if groups == 1:
            g2 = g.reshape(cout, n * out_len)
            if w.requires_grad:
                _accumulate(w, (g2 @ cols2.T).reshape(cout, cin_g, k))
            gcols = (w.data.reshape(cout, cin * k).T @ g2) if x.requires_grad else None
        else:
            g2 = g.reshape(groups, og, n * out_len)
            w_g2 = w.data.reshape(groups, og, cin_g * k)
            if w.requires_grad:
                _accumulate(w, np.matmul(g2, cols2.transpose(0, 2, 1)).reshape(cout, cin_g, k))
            gcols = np.matmul(w_g2.transpose(0, 2, 1), g2) if x.requires_grad else None
        if x.requires_grad:
            gcols = gcols.reshape(cin, k, n, out_len)
            gxp = np.zeros((cin, n, length + 2 * padding), dtype=x.data.dtype)
            for tap in range(k):
                start = tap * dilation
                stop = start + (out_len - 1) * stride + 1
                gxp[:, :, start:stop:stride] += gcols[:, tap]
            _accumulate(x, gxp[:, :, padding:padding + length] if padding else gxp)

    return _result(out, (x, w, b), back)


def transposed_conv1d_cm(x: Tensor, w: Tensor, b: Tensor, stride: int = 2) -> Tensor:
    """Fractionally strided conv over (Cin, N, L) with kernel == stride,
    so the output length is exactly stride * L. Weights (Cin, Cout, K)."""
    cin, n, length = x.data.shape
    cin_w, cout, k = w.data.shape
    if cin_w != cin:
        raise ShapeError(f"transposed_conv1d weight expects Cin={cin_w}, input has {cin}")
    if k != stride:
        raise ConfigurationError(
            f"kernel {k} != stride {stride}: output length would not be stride*L")
    out_len = stride * length
    x2 = x.data.reshape(cin, n * length)
    w2 = w.data.reshape(cin, cout * k)
    v = (w2.T @ x2).reshape(cout, k, n, length)
    out = np.empty((cout, n, out_len), dtype=x.data.dtype)
    for tap in range(k):
        out[:, :, tap::stride] = v[:, tap]
    out += b.data[:, None, None]

    def back(g):
        if b.requires_grad:
            _accumulate(b, g.sum(axis=(1, 2)))
        gv = np.empty((cout, k, n, length), dtype=g.dtype)
        for tap in range(k):
            gv[:, tap] = g[:, :, tap::stride]
        gv2 = gv.reshape(cout * k, n * length)
        if w.requires_grad:
            _accumulate(w, (gv2 @ x2.T).T.reshape(cin, cout, k))
        if x.requires_grad:
            _accumulate(x, (w2 @ gv2).reshape(cin, n, length))

    return _result(out, (x, w, b), back)


def maxpool1d_cm(x: Tensor, k: int, stride: int) -> Tensor:
    """Window max over (C, N, L); gradient goes to the first argmax."""
    c, n, length = x.data.shape
    if length < k:
        raise ShapeError(f"maxpool1d needs L >= k, got L={length}, k={k}")
    out_len = (length - k) // stride + 1
    if k == 2:
        a = x.data[:, :, 0:(out_len - 1) * stride + 1:stride]
        bb = x.data[:, :, 1:(out_len - 1) * stride + 2:stride]
        arg = (bb > a).astype(np.int64)  # strict: ties keep the first tap
        out = np.maximum(a, bb)
    else:
        windows = np.empty((c, n, k, out_len), dtype=x.data.dtype)
        for tap in range(k):
            windows[:, :, tap] = x.data[:, :, tap:tap + (out_len - 1) * stride + 1:stride]
        arg = np.argmax(windows, axis=2)  # first occurrence on ties
        out = np.take_along_axis(windows, arg[:, :, None, :], axis=2)[:, :, 0, :]

    def back(g):
        gx = np.zeros_like(x.data)
        if stride >= k and out_len * stride <= length:
            span = gx[:, :, :out_len * stride].reshape(c, n, out_len, stride)
            np.put_along_axis(span, arg[:, :, :, None], g[:, :, :, None], axis=3)
        else:
            ci, ni, ji = np.meshgrid(np.arange(c), np.arange(n), np.arange(out_len),
                                     indexing="ij")
            np.add.at(gx, (ci, ni, ji * stride + arg), g)
        _accumulate(x, gx)

    return _result(out, (x,), back)


def batchnorm1d_cm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
                   running_var: np.ndarray, mode: str, momentum: float = 0.1,
                   eps: float = 1e-5) -> Tensor:
    """Per-channel normalization of (C, N, L) over (N, L). Train mode
    updates running stats in place (biased variance throughout)."""
    c, n, length = x.data.shape
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise ShapeError(f"gamma/beta length must equal C={c}")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")

    if mode == "train":
        if n * length < 2:
            raise ShapeError(f"degenerate batch: N*L = {n * length} < 2")
        mu = x.data.mean(axis=(1, 2))
        centered = x.data - mu[:, None, None]
        var = np.mean(centered * centered, axis=(1, 2))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mu = running_mean.astype(x.data.dtype)
        var = running_var.astype(x.data.dtype)
        centered = x.data - mu[:, None, None]

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std[:, None, None]
    out = gamma.data[:, None, None] * xhat + beta.data[:, None, None]

    def back(g):
        if gamma.requires_grad:
            _accumulate(gamma, np.sum(g * xhat, axis=(1, 2)))
        if beta.requires_grad:
            _accumulate(beta, np.sum(g, axis=(1, 2)))
        if x.requires_grad:
            gs = g * gamma.data[:, None, None]
            if mode == "train":
                mean_gs = gs.mean(axis=(1, 2))
                mean_gs_xhat = (gs * xhat).mean(axis=(1, 2))
                gx = inv_std[:, None, None] * (gs - mean_gs[:, None, None]
                                               - xhat * mean_gs_xhat[:, None, None])
            else:
                gx = gs * inv_std[:, None, None]
            _accumulate(x, gx.astype(x.data.dtype))

    return _result(out.astype(x.data.dtype), (x, gamma, beta), back)


def global_avg_pool_time_cm(x: Tensor) -> Tensor:
    """(D, N, T) -> (N, D) mean over time."""
    d, n, t = x.data.shape
    out = np.ascontiguousarray(x.data.mean(axis=-1).T)

    def back(g):
        _accumulate(x, np.repeat(g.T[:, :, None] / t, t, axis=2).astype(x.data.dtype))

    return _result(out, (x,), back)


# ---------------------------------------------------------------------------
# conventional-layout wrappers
# ---------------------------------------------------------------------------

def _to_cm(x: Tensor):
    """(C, L) -> (C, 1, L) view or (N, C, L) -> (C, N, L) swap."""
    if x.data.ndim == 2:
        return expand_dim(x, 1), True
    if x.data.ndim == 3:
        return swap_batch_channel(x), False
    raise ShapeError(f"expected (C, L) or (N, C, L) input, got shape {x.data.shape}")


def _from_cm(x: Tensor, squeeze: bool) -> Tensor:
    return squeeze_dim(x, 1) if squeeze else swap_batch_channel(x)


def conv1d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0,
           dilation: int = 1, groups: int = 1) -> Tensor:
    """Cross-correlation along time. Weights are (Cout, Cin/groups, K)."""
    if w.data.ndim != 3:
        raise ShapeError(f"conv1d weight must be 3-d, got shape {w.data.shape}")
    xcm, squeeze = _to_cm(x)
    out = conv1d_cm(xcm, w, b, stride=stride, padding=padding, dilation=dilation,
                    groups=groups)
    return _from_cm(out, squeeze)


def transposed_conv1d(x: Tensor, w: Tensor, b: Tensor, stride: int = 2) -> Tensor:
    """Fractionally strided conv with kernel == stride: exact length
    multiplication by stride. Weights are (Cin, Cout, K)."""
    xcm, squeeze = _to_cm(x)
    return _from_cm(transposed_conv1d_cm(xcm, w, b, stride=stride), squeeze)


def maxpool1d(x: Tensor, k: int, stride: int) -> Tensor:
    """Max over sliding windows; gradient flows to the first argmax per window."""
    xcm, squeeze = _to_cm(x)
    return _from_cm(maxpool1d_cm(xcm, k, stride), squeeze)


def batchnorm1d(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
                running_var: np.ndarray, mode: str, momentum: float = 0.1,
                eps: float = 1e-5) -> Tensor:
    """Per-channel normalization of (N, C, L) over (N, L)."""
    if x.data.ndim != 3:
        raise ShapeError(f"batchnorm1d expects (N, C, L), got shape {x.data.shape}")
    xcm = swap_batch_channel(x)
    out = batchnorm1d_cm(xcm, gamma, beta, running_mean, running_var, mode,
                         momentum=momentum, eps=eps)
    return swap_batch_channel(out)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map: weight is (O, D), input (D,) or (N, D)."""
    o, d = weight.data.shape
    if x.data.shape[-1] != d:
        raise ShapeError(f"linear expects last dim {d}, got input shape {x.data.shape}")
    if bias.data.shape != (o,):
        raise ShapeError(f"bias shape {bias.data.shape} does not match O={o}")
    out = x.data @ weight.data.T + bias.data

    def back(g):
        if bias.requires_grad:
            _accumulate(bias, g.sum(axis=0) if g.ndim == 2 else g)
        if weight.requires_grad:
            if g.ndim == 2:
                _accumulate(weight, g.T @ x.data)
            else:
                _accumulate(weight, np.outer(g, x.data))
        if x.requires_grad:
            _accumulate(x, g @ weight.data)

    return _result(out, (x, weight, bias), back)


def global_avg_pool_time(x: Tensor) -> Tensor:
    """Mean over the trailing time axis: (D, T) -> (D,) or (N, D, T) -> (N, D)."""
    if x.data.ndim not in (2, 3):
        raise ShapeError(f"expected (D, T) or (N, D, T), got shape {x.data.shape}")
    t = x.data.shape[-1]
    if t < 1:
        raise ShapeError("time axis is empty")
    out = x.data.mean(axis=-1)

    def back(g):
        _accumulate(x, np.repeat(g[..., None] / t, t, axis=-1).astype(x.data.dtype))

    return _result(out, (x,), back)


# ---------------------------------------------------------------------------
# losses and spectra
# ---------------------------------------------------------------------------

def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute difference."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"l1_loss shapes differ: {a.data.shape} vs {b.data.shape}")
    diff = a.data - b.data
    n = diff.size

    def back(g):
        s = np.sign(diff) * (float(np.asarray(g).reshape(())) / n)
        _accumulate(a, s.astype(a.data.dtype))
        _accumulate(b, (-s).astype(b.data.dtype))

    return _result(np.mean(np.abs(diff)), (a, b), back)


def weighted_cross_entropy(z: Tensor, labels, class_weights) -> Tensor:
    """Binary cross-entropy over logits (N, 2), normalized by the sum of the
    per-sample class weights."""
    zd = z.data[None] if z.data.ndim == 1 else z.data
    if zd.ndim != 2 or zd.shape[1] != 2:
        raise ShapeError(f"expected logits (N, 2), got shape {z.data.shape}")
    y = np.asarray(labels).reshape(-1).astype(np.int64)
    if y.shape[0] != zd.shape[0]:
        raise ShapeError(f"{zd.shape[0]} logit rows but {y.shape[0]} labels")
    if np.any((y != 0) & (y != 1)):
        raise LabelError(f"labels must be 0 or 1, got values {sorted(set(y.tolist()))}")
    w = np.asarray([float(class_weights[0]), float(class_weights[1])], dtype=np.float64)
    sample_w = w[y]
    wsum = sample_w.sum()

    zmax = zd.max(axis=1, keepdims=True)
    ez = np.exp(zd - zmax)
    log_probs = (zd - zmax) - np.log(ez.sum(axis=1, keepdims=True))
    ce = -log_probs[np.arange(y.shape[0]), y]
    loss = float((sample_w * ce).sum() / wsum)

    def back(g):
        if not z.requires_grad:
            return
        probs = ez / ez.sum(axis=1, keepdims=True)
        onehot = np.zeros_like(probs)
        onehot[np.arange(y.shape[0]), y] = 1.0
        gz = (probs - onehot) * sample_w[:, None] * (float(np.asarray(g).reshape(())) / wsum)
        gz = gz.astype(z.data.dtype)
        _accumulate(z, gz[0] if z.data.ndim == 1 else gz)

    return _result(np.asarray(loss, dtype=z.data.dtype), (z,), back)


def dft(x: Tensor) -> tuple[Tensor, Tensor]:
    """DFT along the last axis, returned as (real, imag) tensors.

    The transform is linear, so each part backpropagates exactly through
    one more transform of its incoming gradient.
    """
    if x.data.shape[-1] < 1:
        raise ShapeError("dft requires a non-empty last axis")
    spectrum = fourier.dft_complex(x.data)

    def back_real(g):
        gx = fourier.dft_complex(g).real
        _accumulate(x, gx.astype(x.data.dtype))

    def back_imag(g):
        gx = fourier.dft_complex(g).imag
        _accumulate(x, gx.astype(x.data.dtype))

    real = _result(spectrum.real.astype(x.data.dtype), (x,), back_real)
    imag = _result(spectrum.imag.astype(x.data.dtype), (x,), back_imag)
    return real, imag
