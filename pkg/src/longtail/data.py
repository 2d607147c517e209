"""Paths to the bundled toy inputs (corpus, embeddings, lexicon, contractions)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .errors import ArgumentError

BUNDLED = ("toy_corpus.csv", "toy_embeddings.txt", "lexicon.txt", "contractions.txt")


def data_path(name: str) -> Path:
    """Filesystem path of a bundled data file."""
    if name not in BUNDLED:
        raise ArgumentError(f"unknown bundled file {name!r}, expected one of {BUNDLED}")
    return Path(str(resources.files("longtail").joinpath("data", name)))
