"""Discrete Fourier transform along the last axis.

Mixed-radix decimation in time: the signal splits into r interleaved
sub-signals of length m (the largest divisor not above the dense
cutoff), whose transforms are computed with one batched dense matrix
product and then merged with a single twiddle combine. Lengths with no
small divisor fall back to the direct O(n^2) product. Twiddles and
dense matrices are cached per (length, dtype); float32/complex64 inputs
transform in complex64, everything else in complex128 (the 64-bit mode
used for verification)."""

from functools import lru_cache

import numpy as np

# Largest sub-transform handled by a dense matrix product.
_DENSE_CUTOFF = 32


@lru_cache(maxsize=64)
def _dense_matrix(n: int, dtype: str) -> np.ndarray:
    k = np.arange(n)
    m = np.exp((-2j * np.pi / n) * np.outer(k, k)).astype(dtype)
    m.setflags(write=False)
    return m


@lru_cache(maxsize=64)
def _twiddle(n: int, r: int, dtype: str) -> np.ndarray:
    """(r, r, m) factors: tw[q, j, i] = exp(-2i*pi*q*(j*m + i)/n)."""
    m = n // r
    t = np.exp((-2j * np.pi / n) * np.outer(np.arange(r), np.arange(n)))
    t = t.reshape(r, r, m).astype(dtype)
    t.setflags(write=False)
    return t


@lru_cache(maxsize=64)
def _split(n: int) -> int:
    """Largest divisor of n that fits the dense cutoff (1 if none)."""
    for m in range(min(n, _DENSE_CUTOFF), 1, -1):
        if n % m == 0:
            return m
    return 1


def _dft(x: np.ndarray, dtype: str) -> np.ndarray:
    n = x.shape[-1]
    m = n if n <= _DENSE_CUTOFF else _split(n)
    if m in (n, 1):
        return x @ _dense_matrix(n, dtype).T
    r = n // m
    lead = x.shape[:-1]
    # x[t] with t = s*r + q -> sub-signal q, position s.
    sub = np.swapaxes(x.reshape(lead + (m, r)), -1, -2) @ _dense_matrix(m, dtype).T
    tw = _twiddle(n, r, dtype)  # (r, r, m)
    out = np.sum(sub[..., :, None, :] * tw, axis=-3)  # (..., j, i)
    return out.reshape(lead + (n,))


def dft_complex(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unnormalized forward DFT: X[k] = sum_n x[n] exp(-2i*pi*k*n/N)."""
    x = np.asarray(x)
    if x.shape[axis] < 1:
        raise ValueError("dft requires a non-empty transform axis")
    dtype = "complex64" if x.dtype in (np.float32, np.complex64) else "complex128"
    moved = np.moveaxis(x, axis, -1).astype(dtype)
    out = _dft(moved, dtype)
    return np.moveaxis(out, -1, axis)


def dft_real(x: np.ndarray, axis: int = -1) -> tuple[np.ndarray, np.ndarray]:
    """Forward DFT of a real signal, returned as (real, imag) arrays."""
    out = dft_complex(x, axis=axis)
    return out.real, out.imag
