"""Long-tail corpus analysis: uniqueness scores, binning, and the
additional-true-positive comparison.

A word is class-unique when it occurs in tweets of exactly one class. A
tweet's uniqueness score is the fraction of its distinct words that are
unique to its own class; tweets full of cross-class vocabulary score near
zero and sit in the hard-to-classify long tail. Scores are binned into 11
ranges: [0,0], (0,0.1], ..., (0.9,1.0], labelled by their upper bound.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ArgumentError, DataError
from .preprocess import ProcessedTweet

log = logging.getLogger(__name__)

BIN_LABELS = ("0", "0.1", "0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8", "0.9", "1.0")
N_BINS = len(BIN_LABELS)

UniqueWordIndex = dict[str, frozenset]


def unique_words(tweets: Sequence[ProcessedTweet]) -> UniqueWordIndex:
    """Per class, the set of words appearing in no other class."""
    seen: dict[str, set[str]] = {}
    for tweet in tweets:
        seen.setdefault(tweet.label, set()).update(tweet.tokens)
    index: UniqueWordIndex = {}
    for label, words in seen.items():
        others: set[str] = set()
        for other_label, other_words in seen.items():
            if other_label != label:
                others |= other_words
        index[label] = frozenset(words - others)
    # disjoint by construction; guard against regressions
    labels = list(index)
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            if index[a] & index[b]:
                raise DataError(f"unique-word sets for {a!r} and {b!r} overlap")
    return index


def uniqueness(tweet: ProcessedTweet, index: UniqueWordIndex) -> float:
    """Fraction of the tweet's distinct words unique to its own class."""
    distinct = set(tweet.tokens)
    if not distinct:
        raise ArgumentError(f"tweet {tweet.id!r} has no tokens")
    if tweet.label not in index:
        raise DataError(f"tweet {tweet.id!r} has unknown label {tweet.label!r}")
    return len(distinct & index[tweet.label]) / len(distinct)


def bin_score(score: float) -> int:
    """Bin index 0..10: bin 0 holds exactly 0, bin b holds ((b-1)/10, b/10]."""
    if not 0.0 <= score <= 1.0:
        raise ArgumentError(f"uniqueness score must lie in [0, 1], got {score}")
    if score == 0.0:
        return 0
    return math.ceil(score * 10)


@dataclass
class UniquenessReport:
    """Scores and their binned distribution over one dataset."""

    entries: list[tuple[str, str, float, int]]   # (id, label, score, bin)
    bin_counts: tuple[int, ...]
    cumulative_pct: tuple[float, ...]
    per_class_fractions: dict[str, tuple[float, ...]]
    n_scored: int
    n_skipped: int


def distribution(tweets: Sequence[ProcessedTweet]) -> UniquenessReport:
    """Score every tweet and aggregate the 11-bin distribution.

    Tweets left with zero tokens by normalization are skipped with a
    logged warning and excluded from every aggregate.
    """
    if not tweets:
        raise DataError("dataset is empty")
    index = unique_words(tweets)
    entries: list[tuple[str, str, float, int]] = []
    skipped = 0
    for tweet in tweets:
        if not tweet.tokens:
            log.warning("skipping tweet %s: no tokens after normalization", tweet.id)
            skipped += 1
            continue
        score = uniqueness(tweet, index)
        entries.append((tweet.id, tweet.label, score, bin_score(score)))
    if not entries:
        raise DataError("no scorable tweets: every tweet normalized to zero tokens")

    bin_counts = [0] * N_BINS
    class_bin_counts: dict[str, list[int]] = {}
    class_totals: dict[str, int] = {}
    for _, label, _, bin_idx in entries:
        bin_counts[bin_idx] += 1
        class_bin_counts.setdefault(label, [0] * N_BINS)[bin_idx] += 1
        class_totals[label] = class_totals.get(label, 0) + 1

    n_scored = len(entries)
    running = 0
    cumulative = []
    for count in bin_counts:
        running += count
        cumulative.append(100.0 * running / n_scored)
    fractions = {label: tuple(c / class_totals[label] for c in counts)
                 for label, counts in class_bin_counts.items()}
    return UniquenessReport(entries=entries, bin_counts=tuple(bin_counts),
                            cumulative_pct=tuple(cumulative),
                            per_class_fractions=fractions,
                            n_scored=n_scored, n_skipped=skipped)


def additional_true_positives(gold: Sequence[tuple[str, str]],
                              pred_a: Mapping[str, str],
                              pred_b: Mapping[str, str]) -> list[str]:
    """Ids that prediction A got right while prediction B got wrong."""
    gold_ids = [tweet_id for tweet_id, _ in gold]
    gold_set = set(gold_ids)
    for name, pred in (("A", pred_a), ("B", pred_b)):
        missing = [i for i in gold_ids if i not in pred]
        if missing:
            raise DataError(f"prediction {name} is missing id {missing[0]!r}")
        extra = sorted(set(pred) - gold_set)
        if extra:
            raise DataError(f"prediction {name} has unknown id {extra[0]!r}")
    return [tweet_id for tweet_id, label in gold
            if pred_a[tweet_id] == label and pred_b[tweet_id] != label]


@dataclass
class AtpReport:
    """Additional true positives and their share per uniqueness bin."""

    ids: tuple[str, ...]
    bin_percent: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.ids)


def atp_distribution(atp_ids: Sequence[str], scores: Mapping[str, float]) -> AtpReport:
    """Percentage of additional true positives per bin (sums to 100)."""
    counts = [0] * N_BINS
    for tweet_id in atp_ids:
        if tweet_id not in scores:
            raise DataError(f"no uniqueness score for tweet {tweet_id!r}")
        counts[bin_score(scores[tweet_id])] += 1
    total = len(atp_ids)
    if total:
        percent = tuple(100.0 * c / total for c in counts)
    else:
        percent = (0.0,) * N_BINS
    return AtpReport(ids=tuple(atp_ids), bin_percent=percent)
