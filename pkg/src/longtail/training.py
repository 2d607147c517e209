"""Loss, Adam optimizer, mini-batch training loop, and cross-validation.

Training is deterministic: the shuffle order, dropout masks, and
parameter initialization all come from seeded streams, so the same seed
reproduces the same weights and loss history bit for bit.
"""

from __future__ import annotations

import math
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ArgumentError, DataError, NumericError, ShapeError
from .evaluation import EvalReport, average_reports, evaluate
from .models import Model, ModelConfig, build_model, config_to_mapping
from .numeric import RngStream, Tensor
from .preprocess import ProcessedTweet
from .vocab import EmbeddingTable, Vocabulary, build_matrix, encode_dataset

PROB_FLOOR = 1e-12


def cross_entropy(pred, targets) -> float:
    """Mean categorical cross-entropy over a batch.

    Predictions are clamped to >= 1e-12 before the log so confidently
    wrong rows still yield a finite loss.
    """
    pred = np.asarray(pred, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if pred.ndim == 1:
        pred = pred[None]
    if targets.ndim == 1:
        targets = targets[None]
    if pred.shape != targets.shape or pred.ndim != 2:
        raise ShapeError(f"prediction shape {pred.shape} does not match targets {targets.shape}")
    clamped = np.maximum(pred, PROB_FLOOR)
    return float(-(targets * np.log(clamped)).sum() / pred.shape[0])


@dataclass
class AdamState:
    """Per-parameter moment estimates and the shared step counter."""

    m: dict[str, Tensor]
    v: dict[str, Tensor]
    t: int = 0
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Mapping[str, Tensor], **hyper) -> "AdamState":
        return cls(m={k: np.zeros_like(v) for k, v in params.items()},
                   v={k: np.zeros_like(v) for k, v in params.items()}, **hyper)


def adam_step(params: "OrderedDict[str, Tensor]", grads: Mapping[str, Tensor],
              state: AdamState) -> tuple["OrderedDict[str, Tensor]", AdamState]:
    """One Adam update, in place on the parameter tensors."""
    if set(grads) != set(params):
        missing = set(params) ^ set(grads)
        raise ArgumentError(f"gradient names do not match parameters: {sorted(missing)}")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, theta in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        theta -= state.alpha * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


@dataclass
class TrainRecord:
    """What one training run did: per-epoch mean loss and provenance."""

    epoch_losses: list[float]
    wall_seconds: float
    seed: int
    config: dict[str, str]


def train(model: Model, inputs: Tensor, targets: Tensor, epochs: int = 10,
          batch: int = 100, seed: int = 0) -> TrainRecord:
    """Mini-batch training with per-epoch reshuffling.

    Rows are shuffled with the seeded stream each epoch and split into
    consecutive batches (the last one may be smaller).
    """
    inputs = np.asarray(inputs)
    targets = np.asarray(targets, dtype=np.float64)
    n_rows = inputs.shape[0]
    if n_rows == 0:
        raise ArgumentError("training fold is empty")
    if targets.shape[0] != n_rows:
        raise ShapeError(f"inputs have {n_rows} rows but targets have {targets.shape[0]}")
    if epochs < 1 or batch < 1:
        raise ArgumentError(f"epochs and batch must be >= 1, got {epochs}, {batch}")
    rng = RngStream(seed)
    params = model.params()
    state = AdamState.for_params(params)
    losses: list[float] = []
    started = time.perf_counter()
    for epoch in range(epochs):
        order = rng.permutation(n_rows)
        epoch_loss = 0.0
        for start in range(0, n_rows, batch):
            rows = order[start:start + batch]
            probs = model.forward(inputs[rows], mode="train", rng=rng)
            loss = cross_entropy(probs, targets[rows])
            if not math.isfinite(loss):
                raise NumericError(f"non-finite loss {loss} at epoch {epoch} "
                                   f"batch {start // batch}")
            epoch_loss += loss * len(rows)
            grads = model.backward(targets[rows])
            adam_step(params, grads, state)
        losses.append(epoch_loss / n_rows)
    wall = time.perf_counter() - started
    return TrainRecord(epoch_losses=losses, wall_seconds=wall, seed=seed,
                       config=dict(config_to_mapping(model.config)))


@dataclass
class FoldSplit:
    """k disjoint row-index lists covering a dataset."""

    folds: list[np.ndarray]

    def train_indices(self, held_out: int) -> np.ndarray:
        rest = [f for i, f in enumerate(self.folds) if i != held_out]
        return np.concatenate(rest)


def kfold_split(labels: Sequence[str], k: int = 5, seed: int = 0,
                stratified: bool = True) -> FoldSplit:
    """Shuffled (optionally per-class round-robin) assignment to k folds."""
    if k < 2:
        raise ArgumentError(f"k must be >= 2, got {k}")
    n_rows = len(labels)
    if n_rows < k:
        raise DataError(f"dataset has {n_rows} rows, cannot make {k} folds")
    rng = RngStream(seed)
    assignments: list[list[int]] = [[] for _ in range(k)]
    if stratified:
        by_class: "OrderedDict[str, list[int]]" = OrderedDict()
        for idx, label in enumerate(labels):
            by_class.setdefault(label, []).append(idx)
        for label, members in by_class.items():
            if len(members) < k:
                raise DataError(f"class {label!r} has {len(members)} members, "
                                f"need at least {k} for {k}-fold splits")
            order = rng.permutation(len(members))
            for slot, pos in enumerate(order):
                assignments[slot % k].append(members[pos])
    else:
        order = rng.permutation(n_rows)
        for slot, idx in enumerate(order):
            assignments[slot % k].append(int(idx))
    folds = [np.array(sorted(rows), dtype=np.int64) for rows in assignments]
    _check_fold_invariants(folds, labels, stratified)
    return FoldSplit(folds)


def _check_fold_invariants(folds, labels, stratified) -> None:
    combined = np.concatenate(folds)
    if len(np.unique(combined)) != len(labels) or len(combined) != len(labels):
        raise DataError("folds are not a disjoint cover of the dataset")
    if stratified:
        label_set = set(labels)
        for label in label_set:
            counts = [sum(1 for i in fold if labels[i] == label) for fold in folds]
            if max(counts) - min(counts) > 1:
                raise DataError(f"class {label!r} is unbalanced across folds: {counts}")


def predict_labels(model: Model, inputs: Tensor, label_names: Sequence[str],
                   batch: int = 100) -> list[str]:
    """Argmax class per row, evaluated in deterministic chunks."""
    out: list[str] = []
    for start in range(0, inputs.shape[0], batch):
        probs = model.forward(inputs[start:start + batch], mode="eval")
        for row in probs.argmax(axis=1):
            out.append(label_names[int(row)])
    return out


@dataclass
class CrossValResult:
    """Everything a cross-validation run produced."""

    fold_reports: list[EvalReport]
    averaged: EvalReport
    models: list[Model]
    records: list[TrainRecord]
    split: FoldSplit
    vocab: Vocabulary
    label_names: list[str]
    predictions: list[dict[str, str]] = field(default_factory=list)


# offset separating the weight-init stream from the shuffle/dropout stream
TRAIN_SEED_OFFSET = 104729


def cross_validate(config: ModelConfig, tweets: Sequence[ProcessedTweet],
                   table: EmbeddingTable, *, non_hate_label: str, k: int = 5,
                   seed: int = 0, epochs: int = 10, batch: int = 100) -> CrossValResult:
    """Train on k-1 folds, evaluate on the held-out fold, k times over.

    The averaged report is the arithmetic mean of each metric across
    folds. Fold f uses seed + f for its weights and a derived stream for
    shuffling/dropout, so folds are independent and reproducible.
    """
    if not tweets:
        raise DataError("dataset is empty")
    labels = [t.label for t in tweets]
    label_names = sorted(set(labels))
    if non_hate_label not in label_names:
        raise DataError(f"non-hate label {non_hate_label!r} not present in dataset labels "
                        f"{label_names}")
    if config.n_classes != len(label_names):
        raise ArgumentError(f"config says {config.n_classes} classes but dataset has "
                            f"{len(label_names)}: {label_names}")
    vocab = Vocabulary.from_tweets(tweets)
    emb = build_matrix(vocab, table, seed)
    encoded = encode_dataset(tweets, vocab, config.seq_len)
    label_col = {label: col for col, label in enumerate(label_names)}
    onehot = np.zeros((len(tweets), len(label_names)), dtype=np.float64)
    for row, label in enumerate(labels):
        onehot[row, label_col[label]] = 1.0

    split = kfold_split(labels, k=k, seed=seed, stratified=True)
    fold_reports: list[EvalReport] = []
    models: list[Model] = []
    records: list[TrainRecord] = []
    predictions: list[dict[str, str]] = []
    for fold_idx, held_out in enumerate(split.folds):
        train_rows = split.train_indices(fold_idx)
        model = build_model(config.with_seed(config.seed + fold_idx), emb)
        record = train(model, encoded[train_rows], onehot[train_rows],
                       epochs=epochs, batch=batch,
                       seed=seed + fold_idx + TRAIN_SEED_OFFSET)
        pred = predict_labels(model, encoded[held_out], label_names, batch)
        gold = [labels[i] for i in held_out]
        fold_reports.append(evaluate(gold, pred, label_names, non_hate_label))
        models.append(model)
        records.append(record)
        predictions.append({tweets[i].id: p for i, p in zip(held_out, pred)})
    averaged = average_reports(fold_reports)
    return CrossValResult(fold_reports=fold_reports, averaged=averaged, models=models,
                          records=records, split=split, vocab=vocab,
                          label_names=label_names, predictions=predictions)
