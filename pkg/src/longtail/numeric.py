"""Dense float64 array math and seeded randomness for the layer kernels.

All tensors in this package are numpy ``ndarray`` values: 64-bit floats in
row-major (C) order. The helpers here are deliberately thin wrappers that
add the shape/argument checks the rest of the code relies on.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError, ShapeError

Tensor = np.ndarray


def tensor(values) -> Tensor:
    """Coerce ``values`` to a float64 array, rejecting NaN/Inf entries."""
    arr = np.array(values, dtype=np.float64)
    if arr.size and not np.isfinite(arr).all():
        raise ArgumentError("tensor entries must be finite")
    return arr


class RngStream:
    """Deterministic random stream backed by a 64-bit PCG64 generator.

    The same seed always yields the same draw sequence. A stream has a
    single owner and must never be shared across threads.
    """

    def __init__(self, seed: int) -> None:
        seed = int(seed)
        if seed < 0:
            raise ArgumentError(f"seed must be a non-negative integer, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def uniform(self, lo: float, hi: float, shape) -> Tensor:
        """Draw uniformly from [lo, hi), advancing the stream."""
        if not lo < hi:
            raise ArgumentError(f"uniform bounds require lo < hi, got [{lo}, {hi})")
        return self._gen.uniform(lo, hi, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        """Random permutation of range(n), advancing the stream."""
        if n < 0:
            raise ArgumentError(f"permutation length must be >= 0, got {n}")
        return self._gen.permutation(n)


def rng_uniform(stream: RngStream, lo: float, hi: float, n: int) -> Tensor:
    """n independent uniform draws from [lo, hi)."""
    if n < 0:
        raise ArgumentError(f"draw count must be >= 0, got {n}")
    return stream.uniform(lo, hi, int(n))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2-D tensors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got shapes {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} x {b.shape}")
    return a @ b


def softmax(v: Tensor) -> Tensor:
    """Softmax over the last axis, computed with max-subtraction.

    Accepts a vector or a batch of row vectors; each output row is a
    probability distribution summing to 1.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 0 or v.shape[-1] == 0:
        raise ShapeError(f"softmax needs at least one entry, got shape {v.shape}")
    shifted = v - v.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def relu(t: Tensor) -> Tensor:
    """Elementwise max(0, x)."""
    return np.maximum(np.asarray(t, dtype=np.float64), 0.0)


def sigmoid(x: Tensor) -> Tensor:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
