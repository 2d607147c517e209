"""Tweet normalization: placeholders, contractions, hashtags, elongation.

The pipeline turns raw tweet text into a flat list of lowercase tokens:

1. lowercase the text;
2. replace URLs, @mentions and standalone numerals with the placeholder
   tokens ``<url>``, ``<mention>`` and ``<number>``;
3. expand contractions ("can't" -> "can not") from a lookup table;
4. split on whitespace and punctuation (punctuation is dropped, the
   placeholder tokens and ``#hashtags`` survive intact);
5. split hashtags into words ("#banrefugees" -> "ban refugees");
6. collapse elongated spellings ("yaaaay" -> "yay").

Spelling correction and lemmatization are deliberately not part of the
pipeline; callers that need them can post-process the token list.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import ArgumentError, DataError, ParseError

PLACEHOLDERS = ("<url>", "<mention>", "<number>")

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_MENTION_RE = re.compile(r"@\w+")
_NUMBER_RE = re.compile(r"(?<![\w<])\d+(?:[.,]\d+)*(?![\w>])")
_TOKEN_RE = re.compile(r"<url>|<mention>|<number>|#\w+|\w+")
_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_RUN_RE = re.compile(r"(.)\1{2,}", re.DOTALL)


@dataclass(frozen=True)
class RawTweet:
    """One labelled tweet as read from disk."""

    id: str
    label: str
    text: str


@dataclass(frozen=True)
class ProcessedTweet:
    """A tweet after normalization: an ordered list of lowercase tokens."""

    id: str
    label: str
    tokens: tuple[str, ...]


class Lexicon:
    """Word -> corpus frequency map driving hashtag segmentation.

    All words are lowercase and all counts are positive integers.
    Read-only after construction, so it is safe to share across threads.
    """

    def __init__(self, counts: Mapping[str, int]) -> None:
        cleaned: dict[str, int] = {}
        for word, count in counts.items():
            if not word or word != word.lower():
                raise ArgumentError(f"lexicon words must be nonempty lowercase, got {word!r}")
            if int(count) < 1:
                raise ArgumentError(f"lexicon count for {word!r} must be >= 1, got {count}")
            cleaned[word] = int(count)
        self._counts = cleaned
        self.total = sum(cleaned.values())
        self.max_word_len = max((len(w) for w in cleaned), default=0)

    def __contains__(self, word: str) -> bool:
        return word in self._counts

    def __len__(self) -> int:
        return len(self._counts)

    def freq(self, word: str) -> int:
        return self._counts.get(word, 0)

    @classmethod
    def load(cls, path) -> "Lexicon":
        """Read a lexicon file: one ``word<SPACE>count`` per line, UTF-8."""
        counts: dict[str, int] = {}
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise ParseError(f"{path}:{lineno}: expected 'word count', got {line!r}")
                word, raw_count = parts
                try:
                    count = int(raw_count)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: count {raw_count!r} is not an integer") from None
                if count < 1:
                    raise ParseError(f"{path}:{lineno}: count must be >= 1, got {count}")
                counts.setdefault(word, count)
        return cls(counts)


def load_contractions(path) -> dict[str, str]:
    """Read a contraction table: ``contraction<TAB>expansion`` per line."""
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ParseError(f"{path}:{lineno}: expected 'contraction<TAB>expansion'")
            table.setdefault(parts[0].lower(), parts[1].lower())
    return table


def load_dataset(path) -> list[RawTweet]:
    """Read a dataset CSV with header ``id,label,text`` (RFC-4180 quoting)."""
    rows: list[RawTweet] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["id", "label", "text"]:
            raise ParseError(f"{path}:1: expected header 'id,label,text', got {header!r}")
        for row in reader:
            if len(row) != 3:
                raise ParseError(f"{path}:{reader.line_num}: expected 3 fields, got {len(row)}")
            tweet_id, label, text = row
            if not tweet_id:
                raise ParseError(f"{path}:{reader.line_num}: empty tweet id")
            if tweet_id in seen:
                raise DataError(f"{path}: duplicate tweet id {tweet_id!r}")
            seen.add(tweet_id)
            rows.append(RawTweet(tweet_id, label, text))
    return rows


def collapse_elongation(word: str, lexicon: Lexicon) -> str:
    """Squeeze character runs of length >= 3.

    Runs are first collapsed to two characters; if that form is not in
    the lexicon the runs are collapsed to one character instead, and if
    that is also unknown the two-character form wins.
    """
    if not word:
        raise ArgumentError("word must be nonempty")
    if not _RUN_RE.search(word):
        return word
    two = _RUN_RE.sub(r"\1\1", word)
    if two in lexicon:
        return two
    one = _RUN_RE.sub(r"\1", word)
    if one in lexicon:
        return one
    return two


def segment_hashtag(tag: str, lexicon: Lexicon) -> list[str]:
    """Split a ``#hashtag`` into words.

    Camel-case boundaries are split first ("#BanIslam" -> "Ban", "Islam");
    each remaining chunk is then segmented by a unigram Viterbi pass over
    the lexicon. Chunks that contain no lexicon word at all are returned
    whole, so the output always concatenates back to the lowercased input
    minus the leading '#'.
    """
    if not tag.startswith("#"):
        raise ArgumentError(f"hashtag must start with '#', got {tag!r}")
    words: list[str] = []
    for chunk in _CAMEL_RE.split(tag[1:]):
        if not chunk:
            continue
        lowered = chunk.lower()
        segmented = _segment_chunk(lowered, lexicon)
        words.extend(segmented if segmented is not None else [lowered])
    return words


def _segment_chunk(chunk: str, lexicon: Lexicon) -> list[str] | None:
    """Viterbi segmentation maximizing sum(log(freq/total)) over words.

    Unknown single characters are allowed at a log(1/total) penalty so a
    path always exists. Returns None when no lexicon word participates in
    the best path (the caller then keeps the chunk whole).
    """
    n = len(chunk)
    if n == 0:
        return []
    if lexicon.total <= 0:
        return None
    total = float(lexicon.total)
    max_len = min(n, max(1, lexicon.max_word_len))
    neg_inf = float("-inf")
    best = [neg_inf] * (n + 1)
    best[0] = 0.0
    back = [0] * (n + 1)
    for i in range(1, n + 1):
        for length in range(1, min(i, max_len) + 1):
            j = i - length
            word = chunk[j:i]
            if word in lexicon:
                score = best[j] + math.log(lexicon.freq(word) / total)
            elif length == 1:
                score = best[j] + math.log(1.0 / total)
            else:
                continue
            if score > best[i]:
                best[i] = score
                back[i] = j
    if best[n] == neg_inf:
        return None
    words: list[str] = []
    i = n
    while i > 0:
        words.append(chunk[back[i]:i])
        i = back[i]
    words.reverse()
    if not any(w in lexicon for w in words):
        return None
    return words


def _expand_contractions(text: str, table: Mapping[str, str]) -> str:
    if not table:
        return text
    keys = sorted(table, key=len, reverse=True)
    pattern = re.compile(r"(?<![\w'])(?:" + "|".join(re.escape(k) for k in keys) + r")(?![\w'])")
    return pattern.sub(lambda m: table[m.group(0)], text)


def normalize(raw: RawTweet, lexicon: Lexicon, contractions: Mapping[str, str]) -> ProcessedTweet:
    """Run the full normalization pipeline on one tweet."""
    text = raw.text.lower().replace("’", "'")
    text = _URL_RE.sub(" <url> ", text)
    text = _MENTION_RE.sub(" <mention> ", text)
    text = _NUMBER_RE.sub(" <number> ", text)
    text = _expand_contractions(text, contractions)
    tokens: list[str] = []
    for tok in _TOKEN_RE.findall(text):
        if tok in PLACEHOLDERS:
            tokens.append(tok)
        elif tok.startswith("#"):
            tokens.extend(collapse_elongation(w, lexicon) for w in segment_hashtag(tok, lexicon))
        else:
            tokens.append(collapse_elongation(tok, lexicon))
    return ProcessedTweet(raw.id, raw.label, tuple(tokens))


def normalize_dataset(rows: Iterable[RawTweet], lexicon: Lexicon,
                      contractions: Mapping[str, str]) -> list[ProcessedTweet]:
    return [normalize(row, lexicon, contractions) for row in rows]
