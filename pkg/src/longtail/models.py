"""The three classifier architectures and their serialization.

All models share the same front: an embedding lookup, dropout, and a set
of parallel convolution branches each followed by max pooling. The pooled
branch outputs are concatenated along the time axis (channel counts are
equal). What happens next depends on the kind:

* ``base_cnn``      - optional second max pooling, flatten, dense+softmax;
* ``cnn_gru``       - GRU over the concatenated timesteps, global max
                      pooling, dense+softmax (no second pooling);
* ``cnn_scnn``      - like base_cnn but with four extra gapped-window
                      branches acting as skip-gram feature extractors.

Weight files use a little-endian binary container (magic "LTNN"); the
model configuration is serialized alongside as a flat key=value text
block so a run can be rebuilt from disk.
"""

from __future__ import annotations

import struct
from collections import OrderedDict
from dataclasses import dataclass, fields, replace
from typing import Mapping

import numpy as np

from .errors import ArgumentError, BuildError, FormatError, InputError, ParseError, ShapeError
from .layers import (Conv1d, Dense, GruLayer, WindowShape, dropout, dropout_backward,
                     gapped_window_shapes, global_maxpool, global_maxpool_backward,
                     maxpool1d, maxpool1d_backward)
from .numeric import RngStream, Tensor, softmax
from .vocab import PAD_INDEX, EmbeddingMatrix

MODEL_KINDS = ("base_cnn", "cnn_gru", "cnn_scnn")

WEIGHTS_MAGIC = b"LTNN"
WEIGHTS_VERSION = 1


@dataclass
class ModelConfig:
    """Architecture description; defaults follow the reference setup."""

    kind: str
    n_classes: int
    seq_len: int = 100
    emb_dim: int = 300
    plain_window_sizes: tuple[int, ...] = (2, 3, 4)
    filters: int = 100
    pool: int = 4
    pool_stride: int = 4
    skipped_specs: tuple[tuple[int, int], ...] = ((1, 3), (1, 4), (2, 4))
    gru_units: int = 100
    dropout: float = 0.2
    second_pooling: bool | None = None
    trainable_embeddings: bool = False
    per_branch_dropout: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ArgumentError(f"unknown model kind {self.kind!r}, expected one of {MODEL_KINDS}")
        if self.n_classes < 2:
            raise ArgumentError(f"n_classes must be >= 2, got {self.n_classes}")
        for name in ("seq_len", "emb_dim", "filters", "pool", "pool_stride", "gru_units"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.plain_window_sizes:
            raise ArgumentError("plain_window_sizes must not be empty")
        if any(j < 1 for j in self.plain_window_sizes):
            raise ArgumentError(f"plain window sizes must be >= 1, got {self.plain_window_sizes}")
        if not 0.0 <= self.dropout < 1.0:
            raise ArgumentError(f"dropout must lie in [0, 1), got {self.dropout}")
        for gap, size in self.skipped_specs:
            if not 0 < gap < size:
                raise ArgumentError(f"skipped spec needs 0 < gap < size, got ({gap}, {size})")
        self.plain_window_sizes = tuple(int(j) for j in self.plain_window_sizes)
        self.skipped_specs = tuple((int(i), int(j)) for i, j in self.skipped_specs)
        if self.second_pooling is None:
            # the GRU path feeds the recurrent layer straight from the
            # branch pooling; the flatten path pools the concatenation again
            self.second_pooling = self.kind != "cnn_gru"

    def with_seed(self, seed: int) -> "ModelConfig":
        return replace(self, seed=seed)


class Model:
    """A built classifier: branch layers, optional GRU, dense head.

    ``forward`` in train mode caches activations on the instance for the
    following ``backward`` call, so training is single-writer; eval-mode
    forward stores nothing and is safe to run concurrently over shared
    parameters.
    """

    def __init__(self, config: ModelConfig, emb: EmbeddingMatrix) -> None:
        if emb.dim != config.emb_dim:
            raise BuildError(f"embedding: matrix dimension {emb.dim} does not match "
                             f"config emb_dim {config.emb_dim}")
        self.config = config
        self.emb = emb
        rng = RngStream(config.seed)

        windows: list[tuple[str, WindowShape]] = []
        for size in config.plain_window_sizes:
            windows.append((f"conv{size}", WindowShape.plain(size)))
        if config.kind == "cnn_scnn":
            for gap, size in config.skipped_specs:
                for shape in gapped_window_shapes(gap, size):
                    windows.append((f"sconv_{shape.label}", shape))

        self.branches: list[tuple[str, Conv1d]] = []
        self.branch_pooled_lens: list[int] = []
        for name, shape in windows:
            conv_len = config.seq_len - shape.size + 1
            if conv_len < 1:
                raise BuildError(f"{name}: window size {shape.size} exceeds sequence "
                                 f"length {config.seq_len}")
            if conv_len < config.pool:
                raise BuildError(f"{name}: convolution output length {conv_len} is shorter "
                                 f"than pool size {config.pool}")
            self.branches.append((name, Conv1d(shape, config.emb_dim, config.filters, rng)))
            self.branch_pooled_lens.append((conv_len - config.pool) // config.pool_stride + 1)

        self.concat_len = sum(self.branch_pooled_lens)
        feature_len = self.concat_len
        if config.second_pooling:
            if self.concat_len < config.pool:
                raise BuildError(f"second pooling: concatenated length {self.concat_len} is "
                                 f"shorter than pool size {config.pool}")
            feature_len = (self.concat_len - config.pool) // config.pool_stride + 1
        self.feature_len = feature_len

        self.gru: GruLayer | None = None
        if config.kind == "cnn_gru":
            self.gru = GruLayer(config.filters, config.gru_units, rng)
            dense_in = config.gru_units
        else:
            dense_in = feature_len * config.filters
        self.dense = Dense(dense_in, config.n_classes, rng)
        self._cache: dict | None = None

    # -- parameter bookkeeping -------------------------------------------

    def params(self) -> "OrderedDict[str, Tensor]":
        """Every trainable tensor, keyed by a stable qualified name."""
        out: OrderedDict[str, Tensor] = OrderedDict()
        for name, conv in self.branches:
            for pname, value in conv.params().items():
                out[f"{name}/{pname}"] = value
        if self.gru is not None:
            for pname, value in self.gru.params().items():
                out[f"gru/{pname}"] = value
        for pname, value in self.dense.params().items():
            out[f"dense/{pname}"] = value
        if self.config.trainable_embeddings:
            out["embedding/table"] = self.emb.matrix
        return out

    def param_count(self) -> int:
        return sum(int(v.size) for v in self.params().values())

    def state_tensors(self) -> "OrderedDict[str, Tensor]":
        """Everything a weight file needs: params plus the (possibly
        frozen) embedding table."""
        out = self.params()
        if "embedding/table" not in out:
            out["embedding/table"] = self.emb.matrix
        return out

    # -- forward / backward ----------------------------------------------

    def forward(self, batch, mode: str = "eval", rng: RngStream | None = None) -> Tensor:
        """Class probability rows for a batch of index sequences."""
        if mode not in ("train", "eval"):
            raise ArgumentError(f"mode must be 'train' or 'eval', got {mode!r}")
        ids = np.asarray(batch, dtype=np.int64)
        squeezed = ids.ndim == 1
        if squeezed:
            ids = ids[None]
        if ids.ndim != 2 or ids.shape[1] != self.config.seq_len:
            raise ShapeError(f"batch shape {ids.shape} does not match sequence length "
                             f"{self.config.seq_len}")
        vocab_size = self.emb.matrix.shape[0]
        if ids.min() < 0 or ids.max() >= vocab_size:
            bad = np.argwhere((ids < 0) | (ids >= vocab_size))[0]
            raise InputError(f"token index {ids[tuple(bad)]} out of range [0, {vocab_size}) "
                             f"at row {bad[0]} position {bad[1]}")
        train = mode == "train"
        cfg = self.config
        if train and cfg.dropout > 0.0 and rng is None:
            raise ArgumentError("train-mode forward needs an RngStream for dropout")

        embedded = self.emb.matrix[ids]                     # [B, T, d]
        shared_mask = None
        branch_masks: list[np.ndarray | None] = []
        if not cfg.per_branch_dropout:
            dropped, shared_mask = dropout(embedded, cfg.dropout, mode, rng)

        pooled_list = []
        conv_caches = []
        pool_positions = []
        for name, conv in self.branches:
            if cfg.per_branch_dropout:
                branch_in, mask = dropout(embedded, cfg.dropout, mode, rng)
                branch_masks.append(mask)
            else:
                branch_in = dropped
            conv_out, conv_cache = conv.forward(branch_in)
            pooled, positions = maxpool1d(conv_out, cfg.pool, cfg.pool_stride)
            pooled_list.append(pooled)
            conv_caches.append(conv_cache)
            pool_positions.append(positions)

        concat = np.concatenate(pooled_list, axis=1)        # [B, sum T'', F]
        pool2_positions = None
        if cfg.second_pooling:
            features_seq, pool2_positions = maxpool1d(concat, cfg.pool, cfg.pool_stride)
        else:
            features_seq = concat

        gru_cache = None
        global_positions = None
        if self.gru is not None:
            gru_out, gru_cache = self.gru.forward(features_seq)
            feats, global_positions = global_maxpool(gru_out)
        else:
            feats = features_seq.reshape(ids.shape[0], -1)  # time-major, then channel
        logits, dense_cache = self.dense.forward(feats)
        probs = softmax(logits)

        if train:
            self._cache = {
                "ids": ids, "probs": probs, "shared_mask": shared_mask,
                "branch_masks": branch_masks, "conv_caches": conv_caches,
                "pool_positions": pool_positions, "conv_lens": [
                    conv.out_len(cfg.seq_len) for _, conv in self.branches],
                "pool2_positions": pool2_positions, "gru_cache": gru_cache,
                "global_positions": global_positions, "dense_cache": dense_cache,
                "features_shape": features_seq.shape, "squeezed": squeezed,
            }
        return probs[0] if squeezed else probs

    def backward(self, targets) -> "OrderedDict[str, Tensor]":
        """Gradient of the mean batch cross-entropy w.r.t. every parameter.

        Requires a preceding train-mode forward on this instance.
        """
        if self._cache is None:
            raise ArgumentError("backward requires a cached train-mode forward pass")
        cache = self._cache
        cfg = self.config
        probs = cache["probs"]
        targets = np.asarray(targets, dtype=np.float64)
        if cache["squeezed"] and targets.ndim == 1:
            targets = targets[None]
        if targets.shape != probs.shape:
            raise ShapeError(f"target shape {targets.shape} does not match predictions "
                             f"{probs.shape}")
        batch = probs.shape[0]
        grads: OrderedDict[str, Tensor] = OrderedDict()

        dlogits = (probs - targets) / batch
        dense_grads = self.dense.backward(dlogits, cache["dense_cache"])
        dfeats = dense_grads["input"]

        if self.gru is not None:
            seq_shape = cache["features_shape"]
            dgru_out = global_maxpool_backward(dfeats, cache["global_positions"], seq_shape[1])
            gru_grads = self.gru.backward(dgru_out, cache["gru_cache"])
            dfeatures_seq = gru_grads["input"]
        else:
            dfeatures_seq = dfeats.reshape(cache["features_shape"])

        if cfg.second_pooling:
            dconcat = maxpool1d_backward(dfeatures_seq, cache["pool2_positions"], self.concat_len)
        else:
            dconcat = dfeatures_seq

        dembedded = None
        offset = 0
        for idx, (name, conv) in enumerate(self.branches):
            seg_len = self.branch_pooled_lens[idx]
            dpooled = dconcat[:, offset:offset + seg_len, :]
            offset += seg_len
            dconv_out = maxpool1d_backward(dpooled, cache["pool_positions"][idx],
                                           cache["conv_lens"][idx])
            conv_grads = conv.backward(dconv_out, cache["conv_caches"][idx])
            grads[f"{name}/kernel"] = conv_grads["kernel"]
            grads[f"{name}/bias"] = conv_grads["bias"]
            dbranch_in = conv_grads["input"]
            if cfg.per_branch_dropout:
                dbranch_in = dropout_backward(dbranch_in, cache["branch_masks"][idx], cfg.dropout)
            dembedded = dbranch_in if dembedded is None else dembedded + dbranch_in
        if not cfg.per_branch_dropout:
            dembedded = dropout_backward(dembedded, cache["shared_mask"], cfg.dropout)

        if self.gru is not None:
            for pname in self.gru.PARAM_NAMES:
                grads[f"gru/{pname}"] = gru_grads[pname]
        grads["dense/weights"] = dense_grads["weights"]
        grads["dense/bias"] = dense_grads["bias"]

        if cfg.trainable_embeddings:
            demb = np.zeros_like(self.emb.matrix)
            np.add.at(demb, cache["ids"], dembedded)
            demb[PAD_INDEX] = 0.0  # the padding row stays pinned at zero
            grads["embedding/table"] = demb

        ordered = OrderedDict((name, grads[name]) for name in self.params())
        return ordered


def build_model(config: ModelConfig, emb: EmbeddingMatrix) -> Model:
    """Assemble a model; raises BuildError naming the offending stage."""
    return Model(config, emb)


# -- weight container -----------------------------------------------------

def save_weights(path, tensors: Mapping[str, Tensor]) -> None:
    """Write tensors to the little-endian "LTNN" binary container."""
    with open(path, "wb") as handle:
        handle.write(WEIGHTS_MAGIC)
        handle.write(struct.pack("<I", WEIGHTS_VERSION))
        handle.write(struct.pack("<I", len(tensors)))
        for name, value in tensors.items():
            arr = np.ascontiguousarray(value, dtype="<f8")
            encoded = name.encode("utf-8")
            handle.write(struct.pack("<I", len(encoded)))
            handle.write(encoded)
            handle.write(struct.pack("<I", arr.ndim))
            handle.write(np.asarray(arr.shape, dtype="<u4").tobytes())
            handle.write(arr.tobytes())


def _read_exact(handle, count: int, path, what: str) -> bytes:
    data = handle.read(count)
    if len(data) != count:
        raise FormatError(f"{path}: truncated weight file while reading {what}")
    return data


def load_weights(path) -> "OrderedDict[str, Tensor]":
    """Read an "LTNN" container back into an ordered name -> tensor map."""
    out: OrderedDict[str, Tensor] = OrderedDict()
    with open(path, "rb") as handle:
        magic = _read_exact(handle, 4, path, "magic")
        if magic != WEIGHTS_MAGIC:
            raise FormatError(f"{path}: not a weight container (bad magic {magic!r})")
        version = struct.unpack("<I", _read_exact(handle, 4, path, "version"))[0]
        if version != WEIGHTS_VERSION:
            raise FormatError(f"{path}: unsupported container version {version}")
        count = struct.unpack("<I", _read_exact(handle, 4, path, "tensor count"))[0]
        for _ in range(count):
            name_len = struct.unpack("<I", _read_exact(handle, 4, path, "name length"))[0]
            name = _read_exact(handle, name_len, path, "name").decode("utf-8")
            rank = struct.unpack("<I", _read_exact(handle, 4, path, f"rank of {name}"))[0]
            shape = np.frombuffer(_read_exact(handle, 4 * rank, path, f"extents of {name}"),
                                  dtype="<u4").astype(np.int64)
            size = int(np.prod(shape)) if rank else 1
            values = np.frombuffer(_read_exact(handle, 8 * size, path, f"values of {name}"),
                                   dtype="<f8")
            out[name] = values.reshape(shape).astype(np.float64)
    return out


def load_state_into(model: Model, tensors: Mapping[str, Tensor]) -> None:
    """Copy loaded tensors into a built model, validating names and shapes."""
    expected = model.state_tensors()
    for name in tensors:
        if name not in expected:
            raise FormatError(f"weight file has unexpected tensor {name!r}")
    for name, target in expected.items():
        if name not in tensors:
            raise FormatError(f"weight file is missing tensor {name!r}")
        value = tensors[name]
        if tuple(value.shape) != tuple(target.shape):
            raise FormatError(f"tensor {name!r}: file shape {tuple(value.shape)} does not "
                              f"match model shape {tuple(target.shape)}")
        target[...] = value


# -- flat text config block ------------------------------------------------

def config_to_mapping(config: ModelConfig) -> "OrderedDict[str, str]":
    """Flatten a ModelConfig into the key=value text representation."""
    out: OrderedDict[str, str] = OrderedDict()
    for f in fields(config):
        value = getattr(config, f.name)
        if f.name == "plain_window_sizes":
            out[f.name] = ",".join(str(v) for v in value)
        elif f.name == "skipped_specs":
            out[f.name] = ",".join(f"{i}x{j}" for i, j in value)
        elif isinstance(value, bool):
            out[f.name] = "true" if value else "false"
        else:
            out[f.name] = str(value)
    return out


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ArgumentError(f"config key {key!r}: expected a boolean, got {raw!r}")


def config_from_mapping(mapping: Mapping[str, str]) -> ModelConfig:
    """Rebuild a ModelConfig from flat text keys (extra keys are ignored)."""
    known = {f.name for f in fields(ModelConfig)}
    kwargs: dict = {}
    for key, raw in mapping.items():
        if key not in known:
            continue
        raw = raw.strip()
        if key == "kind":
            kwargs[key] = raw
        elif key == "plain_window_sizes":
            try:
                kwargs[key] = tuple(int(v) for v in raw.split(",") if v)
            except ValueError:
                raise ArgumentError(f"config key {key!r}: expected ints, got {raw!r}") from None
        elif key == "skipped_specs":
            specs = []
            for part in (p for p in raw.split(",") if p):
                try:
                    gap, size = part.split("x")
                    specs.append((int(gap), int(size)))
                except ValueError:
                    raise ArgumentError(f"config key {key!r}: expected 'IxJ' pairs, "
                                        f"got {raw!r}") from None
            kwargs[key] = tuple(specs)
        elif key in ("second_pooling", "trainable_embeddings", "per_branch_dropout"):
            kwargs[key] = _parse_bool(raw, key)
        elif key == "dropout":
            try:
                kwargs[key] = float(raw)
            except ValueError:
                raise ArgumentError(f"config key {key!r}: expected a float, got {raw!r}") from None
        else:
            try:
                kwargs[key] = int(raw)
            except ValueError:
                raise ArgumentError(f"config key {key!r}: expected an integer, got {raw!r}") from None
    if "kind" not in kwargs:
        raise ArgumentError("config is missing the 'kind' key")
    if "n_classes" not in kwargs:
        raise ArgumentError("config is missing the 'n_classes' key")
    return ModelConfig(**kwargs)


def write_config_text(path, mapping: Mapping[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for key, value in mapping.items():
            handle.write(f"{key} = {value}\n")


def read_config_text(path) -> "OrderedDict[str, str]":
    """Parse a flat ``key = value`` UTF-8 text block."""
    out: OrderedDict[str, str] = OrderedDict()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ParseError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
            key, _, value = stripped.partition("=")
            out[key.strip()] = value.strip()
    return out
