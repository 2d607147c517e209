"""Network layers with explicit forward and backward passes.

Every layer works on float64 arrays and accepts either a single sequence
``[T, d]`` or a batch ``[B, T, d]``. Forward passes return ``(output,
cache)``; the cache is a per-invocation value handed back to the matching
backward function, so concurrent inference over shared parameters is safe.

The convolution here supports "gapped" windows: a window of size j whose
middle i consecutive positions are deactivated. The kernel only stores
columns for the activated positions, so deactivated positions carry no
trainable weight by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ShapeError
from .numeric import RngStream, Tensor, sigmoid


def glorot_uniform(rng: RngStream, shape, fan_in: int, fan_out: int) -> Tensor:
    """Uniform[-L, L) with L = sqrt(6 / (fan_in + fan_out))."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


def _batched(x, what: str) -> tuple[Tensor, bool]:
    """Promote [T, d] input to [1, T, d]; remember whether we did."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ShapeError(f"{what} expects a 2-D or 3-D input, got shape {x.shape}")


@dataclass(frozen=True)
class WindowShape:
    """A convolution window of ``size`` positions with an activation mask.

    ``mask[p]`` is True when position p is activated. Deactivated
    positions, if any, form exactly one run of ``gap`` positions and the
    two endpoints are always activated.
    """

    size: int
    mask: tuple[bool, ...]
    gap: int

    def __post_init__(self) -> None:
        if self.size < 1 or len(self.mask) != self.size:
            raise ArgumentError(f"mask length {len(self.mask)} does not match window size {self.size}")
        inactive = [p for p, on in enumerate(self.mask) if not on]
        if len(inactive) != self.gap:
            raise ArgumentError(f"mask has {len(inactive)} deactivated positions, gap says {self.gap}")
        if self.gap == 0:
            return
        if not (self.mask[0] and self.mask[-1]):
            raise ArgumentError("window endpoints must be activated")
        if inactive != list(range(inactive[0], inactive[0] + self.gap)):
            raise ArgumentError("deactivated positions must be one contiguous run")

    @classmethod
    def plain(cls, size: int) -> "WindowShape":
        if size < 1:
            raise ArgumentError(f"window size must be >= 1, got {size}")
        return cls(size, (True,) * size, 0)

    @property
    def active_offsets(self) -> tuple[int, ...]:
        return tuple(p for p, on in enumerate(self.mask) if on)

    @property
    def label(self) -> str:
        """E.g. "OXOO": O for activated positions, X for deactivated."""
        return "".join("O" if on else "X" for on in self.mask)


def gapped_window_shapes(gap: int, size: int) -> list[WindowShape]:
    """All window shapes of ``size`` with one ``gap``-long deactivated run.

    The run start k walks the interior positions 2..size-gap (1-indexed),
    so the result has exactly size - gap - 1 shapes, in ascending k order.
    """
    if gap <= 0 or gap >= size:
        raise ArgumentError(f"need 0 < gap < size, got gap={gap} size={size}")
    shapes = []
    for k in range(2, size - gap + 1):
        mask = [True] * size
        mask[k - 1:k - 1 + gap] = [False] * gap
        shapes.append(WindowShape(size, tuple(mask), gap))
    return shapes


class Conv1d:
    """Valid 1-D convolution over activated window offsets, ReLU output.

    The kernel has shape [filters, n_active, in_dim] where n_active =
    size - gap; stride is fixed at 1 and there is no padding, so a length
    T input yields T - size + 1 output steps.
    """

    def __init__(self, window: WindowShape, in_dim: int, filters: int, rng: RngStream) -> None:
        if in_dim < 1 or filters < 1:
            raise ArgumentError(f"in_dim and filters must be >= 1, got {in_dim}, {filters}")
        width = len(window.active_offsets)
        self.window = window
        self.in_dim = in_dim
        self.filters = filters
        self.kernel = glorot_uniform(rng, (filters, width, in_dim),
                                     fan_in=width * in_dim, fan_out=width * filters)
        self.bias = np.zeros(filters, dtype=np.float64)

    def params(self) -> dict[str, Tensor]:
        return {"kernel": self.kernel, "bias": self.bias}

    def out_len(self, seq_len: int) -> int:
        return seq_len - self.window.size + 1

    def _gather(self, x: Tensor, out_len: int) -> Tensor:
        # [B, T', n_active, d] view of the activated offsets per position
        return np.stack([x[:, o:o + out_len, :] for o in self.window.active_offsets], axis=2)

    def forward(self, x) -> tuple[Tensor, dict]:
        x, squeezed = _batched(x, "conv1d")
        _, seq_len, d = x.shape
        if d != self.in_dim:
            raise ShapeError(f"conv1d input has {d} channels, kernel expects {self.in_dim}")
        if seq_len < self.window.size:
            raise ShapeError(f"sequence length {seq_len} shorter than window size {self.window.size}")
        out_len = self.out_len(seq_len)
        windows = self._gather(x, out_len)
        pre = np.einsum("btwd,fwd->btf", windows, self.kernel, optimize=True) + self.bias
        out = np.maximum(pre, 0.0)
        cache = {"x": x, "pre": pre, "squeezed": squeezed}
        return (out[0] if squeezed else out), cache

    def backward(self, upstream, cache: dict) -> dict[str, Tensor]:
        """Gradients w.r.t. kernel, bias and input.

        ReLU uses the subgradient with derivative 0 at exactly 0.
        """
        pre = cache["pre"]
        up = np.asarray(upstream, dtype=np.float64)
        if cache["squeezed"]:
            up = up[None]
        if up.shape != pre.shape:
            raise ShapeError(f"upstream shape {up.shape} does not match forward output {pre.shape}")
        x = cache["x"]
        out_len = pre.shape[1]
        dpre = up * (pre > 0)
        windows = self._gather(x, out_len)
        dkernel = np.einsum("btf,btwd->fwd", dpre, windows, optimize=True)
        dbias = dpre.sum(axis=(0, 1))
        dwindows = np.einsum("btf,fwd->btwd", dpre, self.kernel, optimize=True)
        dx = np.zeros_like(x)
        for rank, offset in enumerate(self.window.active_offsets):
            dx[:, offset:offset + out_len, :] += dwindows[:, :, rank, :]
        return {"kernel": dkernel, "bias": dbias,
                "input": dx[0] if cache["squeezed"] else dx}


def maxpool1d(x, pool: int = 4, stride: int = 4) -> tuple[Tensor, np.ndarray]:
    """Per-channel max over sliding windows; no padding, ties pick the
    lowest index. Returns (pooled, absolute argmax positions)."""
    if pool < 1 or stride < 1:
        raise ArgumentError(f"pool and stride must be >= 1, got {pool}, {stride}")
    x, squeezed = _batched(x, "maxpool1d")
    _, seq_len, _ = x.shape
    if seq_len < pool:
        raise ShapeError(f"sequence length {seq_len} shorter than pool size {pool}")
    out_len = (seq_len - pool) // stride + 1
    starts = np.arange(out_len) * stride
    windows = x[:, starts[:, None] + np.arange(pool), :]   # [B, T'', pool, F]
    arg = windows.argmax(axis=2)                           # first max wins ties
    out = np.take_along_axis(windows, arg[:, :, None, :], axis=2)[:, :, 0, :]
    positions = starts[None, :, None] + arg
    if squeezed:
        return out[0], positions[0]
    return out, positions


def maxpool1d_backward(upstream, positions: np.ndarray, in_len: int) -> Tensor:
    """Scatter upstream gradient to the argmax positions only."""
    up = np.asarray(upstream, dtype=np.float64)
    squeezed = up.ndim == 2
    if squeezed:
        up = up[None]
        positions = positions[None]
    if up.shape != positions.shape:
        raise ShapeError(f"upstream shape {up.shape} does not match argmax shape {positions.shape}")
    batch, _, channels = up.shape
    dx = np.zeros((batch, in_len, channels), dtype=np.float64)
    b_idx = np.arange(batch)[:, None, None]
    f_idx = np.arange(channels)[None, None, :]
    np.add.at(dx, (b_idx, positions, f_idx), up)
    return dx[0] if squeezed else dx


def global_maxpool(x) -> tuple[Tensor, np.ndarray]:
    """Per-feature max over all timesteps. Returns (maxes, argmax rows)."""
    x, squeezed = _batched(x, "global_maxpool")
    if x.shape[1] < 1:
        raise ShapeError("global_maxpool needs at least one timestep")
    arg = x.argmax(axis=1)
    out = np.take_along_axis(x, arg[:, None, :], axis=1)[:, 0, :]
    if squeezed:
        return out[0], arg[0]
    return out, arg


def global_maxpool_backward(upstream, positions: np.ndarray, in_len: int) -> Tensor:
    up = np.asarray(upstream, dtype=np.float64)
    squeezed = up.ndim == 1
    if squeezed:
        up = up[None]
        positions = positions[None]
    if up.shape != positions.shape:
        raise ShapeError(f"upstream shape {up.shape} does not match argmax shape {positions.shape}")
    batch, channels = up.shape
    dx = np.zeros((batch, in_len, channels), dtype=np.float64)
    b_idx = np.arange(batch)[:, None]
    f_idx = np.arange(channels)[None, :]
    np.add.at(dx, (b_idx, positions, f_idx), up)
    return dx[0] if squeezed else dx


class GruLayer:
    """Gated recurrent unit over a sequence of feature vectors.

    Per timestep, with row-vector inputs x and previous state h:

        z = sigmoid(x W_z + h U_z + b_z)          (update gate)
        r = sigmoid(x W_r + h U_r + b_r)          (reset gate)
        hhat = tanh(x W_h + (r * h) U_h + b_h)    (candidate state)
        h' = (1 - z) * h + z * hhat

    The initial state is zero and all hidden states are returned.
    """

    PARAM_NAMES = ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h")

    def __init__(self, in_dim: int, hidden: int, rng: RngStream) -> None:
        if in_dim < 1 or hidden < 1:
            raise ArgumentError(f"in_dim and hidden must be >= 1, got {in_dim}, {hidden}")
        self.in_dim = in_dim
        self.hidden = hidden
        self.W_z = glorot_uniform(rng, (in_dim, hidden), in_dim, hidden)
        self.W_r = glorot_uniform(rng, (in_dim, hidden), in_dim, hidden)
        self.W_h = glorot_uniform(rng, (in_dim, hidden), in_dim, hidden)
        self.U_z = glorot_uniform(rng, (hidden, hidden), hidden, hidden)
        self.U_r = glorot_uniform(rng, (hidden, hidden), hidden, hidden)
        self.U_h = glorot_uniform(rng, (hidden, hidden), hidden, hidden)
        self.b_z = np.zeros(hidden, dtype=np.float64)
        self.b_r = np.zeros(hidden, dtype=np.float64)
        self.b_h = np.zeros(hidden, dtype=np.float64)

    def params(self) -> dict[str, Tensor]:
        return {name: getattr(self, name) for name in self.PARAM_NAMES}

    def forward(self, x) -> tuple[Tensor, dict]:
        x, squeezed = _batched(x, "gru")
        batch, steps, d = x.shape
        if d != self.in_dim:
            raise ShapeError(f"gru input has {d} features, layer expects {self.in_dim}")
        if steps < 1:
            raise ShapeError("gru needs at least one timestep")
        h = np.zeros((batch, self.hidden), dtype=np.float64)
        outputs = np.empty((batch, steps, self.hidden), dtype=np.float64)
        h_prev = np.empty_like(outputs)
        zs = np.empty_like(outputs)
        rs = np.empty_like(outputs)
        hhats = np.empty_like(outputs)
        for t in range(steps):
            xt = x[:, t, :]
            z = sigmoid(xt @ self.W_z + h @ self.U_z + self.b_z)
            r = sigmoid(xt @ self.W_r + h @ self.U_r + self.b_r)
            hhat = np.tanh(xt @ self.W_h + (r * h) @ self.U_h + self.b_h)
            h_prev[:, t, :] = h
            h = (1.0 - z) * h + z * hhat
            outputs[:, t, :] = h
            zs[:, t, :] = z
            rs[:, t, :] = r
            hhats[:, t, :] = hhat
        cache = {"x": x, "h_prev": h_prev, "z": zs, "r": rs, "hhat": hhats,
                 "squeezed": squeezed}
        return (outputs[0] if squeezed else outputs), cache

    def backward(self, upstream, cache: dict) -> dict[str, Tensor]:
        """Backpropagation through time over the cached forward pass."""
        up = np.asarray(upstream, dtype=np.float64)
        if cache["squeezed"]:
            up = up[None]
        x = cache["x"]
        if up.shape != (x.shape[0], x.shape[1], self.hidden):
            raise ShapeError(f"upstream shape {up.shape} does not match gru output "
                             f"{(x.shape[0], x.shape[1], self.hidden)}")
        grads = {name: np.zeros_like(getattr(self, name)) for name in self.PARAM_NAMES}
        dx = np.zeros_like(x)
        dh_next = np.zeros((x.shape[0], self.hidden), dtype=np.float64)
        for t in range(x.shape[1] - 1, -1, -1):
            dh = up[:, t, :] + dh_next
            hp = cache["h_prev"][:, t, :]
            z = cache["z"][:, t, :]
            r = cache["r"][:, t, :]
            hhat = cache["hhat"][:, t, :]
            xt = x[:, t, :]
            dz = dh * (hhat - hp)
            da_z = dz * z * (1.0 - z)
            dhhat = dh * z
            da_h = dhhat * (1.0 - hhat * hhat)
            da_h_U = da_h @ self.U_h.T
            dr = da_h_U * hp
            da_r = dr * r * (1.0 - r)
            grads["W_z"] += xt.T @ da_z
            grads["W_r"] += xt.T @ da_r
            grads["W_h"] += xt.T @ da_h
            grads["U_z"] += hp.T @ da_z
            grads["U_r"] += hp.T @ da_r
            grads["U_h"] += (r * hp).T @ da_h
            grads["b_z"] += da_z.sum(axis=0)
            grads["b_r"] += da_r.sum(axis=0)
            grads["b_h"] += da_h.sum(axis=0)
            dx[:, t, :] = da_z @ self.W_z.T + da_r @ self.W_r.T + da_h @ self.W_h.T
            dh_next = dh * (1.0 - z) + da_z @ self.U_z.T + da_r @ self.U_r.T + da_h_U * r
        grads["input"] = dx[0] if cache["squeezed"] else dx
        return grads


class Dense:
    """Affine map producing logits; softmax is applied by the model head."""

    def __init__(self, in_dim: int, out_dim: int, rng: RngStream) -> None:
        if in_dim < 1 or out_dim < 1:
            raise ArgumentError(f"in_dim and out_dim must be >= 1, got {in_dim}, {out_dim}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weights = glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim)
        self.bias = np.zeros(out_dim, dtype=np.float64)

    def params(self) -> dict[str, Tensor]:
        return {"weights": self.weights, "bias": self.bias}

    def forward(self, x) -> tuple[Tensor, dict]:
        x = np.asarray(x, dtype=np.float64)
        squeezed = x.ndim == 1
        if squeezed:
            x = x[None]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"dense input shape {x.shape} does not match weights {self.weights.shape}")
        out = x @ self.weights + self.bias
        cache = {"x": x, "squeezed": squeezed}
        return (out[0] if squeezed else out), cache

    def backward(self, upstream, cache: dict) -> dict[str, Tensor]:
        up = np.asarray(upstream, dtype=np.float64)
        if cache["squeezed"]:
            up = up[None]
        x = cache["x"]
        if up.shape != (x.shape[0], self.out_dim):
            raise ShapeError(f"upstream shape {up.shape} does not match dense output "
                             f"{(x.shape[0], self.out_dim)}")
        dweights = x.T @ up
        dbias = up.sum(axis=0)
        dx = up @ self.weights.T
        return {"weights": dweights, "bias": dbias,
                "input": dx[0] if cache["squeezed"] else dx}


def dropout(x, ratio: float = 0.2, mode: str = "train",
            rng: RngStream | None = None) -> tuple[Tensor, np.ndarray | None]:
    """Inverted dropout: zero with probability ``ratio``, scale survivors
    by 1/(1-ratio). Eval mode (and ratio 0) is the identity; the returned
    mask is None in that case and must be passed to the backward helper."""
    if not 0.0 <= ratio < 1.0:
        raise ArgumentError(f"dropout ratio must lie in [0, 1), got {ratio}")
    if mode not in ("train", "eval"):
        raise ArgumentError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if mode == "eval" or ratio == 0.0:
        return x, None
    if rng is None:
        raise ArgumentError("train-mode dropout needs an RngStream")
    mask = rng.uniform(0.0, 1.0, x.shape) >= ratio
    return x * mask / (1.0 - ratio), mask


def dropout_backward(upstream, mask: np.ndarray | None, ratio: float) -> Tensor:
    up = np.asarray(upstream, dtype=np.float64)
    if mask is None:
        return up
    return up * mask / (1.0 - ratio)
