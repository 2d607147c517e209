"""Confusion-matrix metrics: per-class P/R/F1, micro, macro, macro-hate.

Degenerate 0/0 ratios are defined as 0 so the metrics stay total on toy
datasets with unpopulated classes. Macro averages are means of per-class
metrics, not metrics of pooled means; the hate-only macro excludes the
designated non-hate label.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ArgumentError, DataError


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def _prf(tp: float, fp: float, fn: float) -> PRF:
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    return PRF(precision, recall, f1)


@dataclass
class ConfusionMatrix:
    """counts[g][p] = number of rows with gold label g predicted as p."""

    labels: tuple[str, ...]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(gold: Sequence[str], pred: Sequence[str],
              labels: Sequence[str]) -> ConfusionMatrix:
    if len(gold) != len(pred):
        raise ArgumentError(f"gold has {len(gold)} rows, predictions have {len(pred)}")
    labels = tuple(labels)
    index = {label: i for i, label in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for g, p in zip(gold, pred):
        if g not in index:
            raise DataError(f"unknown gold label {g!r}")
        if p not in index:
            raise DataError(f"unknown predicted label {p!r}")
        counts[index[g], index[p]] += 1
    return ConfusionMatrix(labels=labels, counts=counts)


def prf_per_class(cm: ConfusionMatrix) -> dict[str, PRF]:
    out: dict[str, PRF] = {}
    for i, label in enumerate(cm.labels):
        tp = float(cm.counts[i, i])
        fp = float(cm.counts[:, i].sum() - cm.counts[i, i])
        fn = float(cm.counts[i, :].sum() - cm.counts[i, i])
        out[label] = _prf(tp, fp, fn)
    return out


def micro_f1(cm: ConfusionMatrix) -> PRF:
    """P/R/F1 from true/false positives pooled across classes."""
    diag = float(np.trace(cm.counts))
    fp = float(cm.counts.sum() - np.trace(cm.counts))
    # single-label multiclass: every off-diagonal cell is one fp and one fn
    return _prf(diag, fp, fp)


def macro_f1(per_class: Mapping[str, PRF], restrict_to: Iterable[str] | None = None) -> PRF:
    """Unweighted mean of per-class metrics, optionally over a subset."""
    if restrict_to is None:
        chosen = list(per_class)
    else:
        chosen = list(restrict_to)
        if not chosen:
            raise ArgumentError("macro average over an empty label subset")
        unknown = [c for c in chosen if c not in per_class]
        if unknown:
            raise ArgumentError(f"labels {unknown} not present in per-class metrics")
    n = len(chosen)
    return PRF(sum(per_class[c].precision for c in chosen) / n,
               sum(per_class[c].recall for c in chosen) / n,
               sum(per_class[c].f1 for c in chosen) / n)


@dataclass
class EvalReport:
    """Per-class and aggregate metrics for one evaluation."""

    labels: tuple[str, ...]
    per_class: dict[str, PRF]
    micro: PRF
    macro: PRF
    macro_hate: PRF
    non_hate_label: str


def evaluate(gold: Sequence[str], pred: Sequence[str], labels: Sequence[str],
             non_hate_label: str) -> EvalReport:
    labels = tuple(labels)
    if non_hate_label not in labels:
        raise DataError(f"non-hate label {non_hate_label!r} not in label set {labels}")
    hate_labels = [label for label in labels if label != non_hate_label]
    if not hate_labels:
        raise ArgumentError("need at least one label besides the non-hate label")
    cm = confusion(gold, pred, labels)
    per_class = prf_per_class(cm)
    return EvalReport(labels=labels, per_class=per_class, micro=micro_f1(cm),
                      macro=macro_f1(per_class), macro_hate=macro_f1(per_class, hate_labels),
                      non_hate_label=non_hate_label)


def average_reports(reports: Sequence[EvalReport]) -> EvalReport:
    """Arithmetic mean of every metric across fold reports."""
    if not reports:
        raise ArgumentError("no reports to average")
    first = reports[0]
    for rep in reports[1:]:
        if rep.labels != first.labels:
            raise ArgumentError(f"cannot average reports over different label sets: "
                                f"{rep.labels} vs {first.labels}")

    def mean(values: list[PRF]) -> PRF:
        n = len(values)
        return PRF(sum(v.precision for v in values) / n,
                   sum(v.recall for v in values) / n,
                   sum(v.f1 for v in values) / n)

    per_class = {label: mean([r.per_class[label] for r in reports]) for label in first.labels}
    return EvalReport(labels=first.labels, per_class=per_class,
                      micro=mean([r.micro for r in reports]),
                      macro=mean([r.macro for r in reports]),
                      macro_hate=mean([r.macro_hate for r in reports]),
                      non_hate_label=first.non_hate_label)


def report_to_dict(report: EvalReport) -> dict:
    """JSON-ready dict: metrics keyed by class label, then the aggregates."""
    def entry(prf: PRF) -> dict:
        return {"precision": prf.precision, "recall": prf.recall, "f1": prf.f1}

    out: dict = {label: entry(prf) for label, prf in report.per_class.items()}
    out["micro"] = entry(report.micro)
    out["macro"] = entry(report.macro)
    out["macro_hate"] = entry(report.macro_hate)
    out["non_hate_label"] = report.non_hate_label
    return out


def report_json(report: EvalReport) -> str:
    """Deterministic JSON rendering (sorted keys, fixed separators)."""
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"
