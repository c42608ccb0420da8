"""Corpus loading, tokenization, and term-document count matrices.

Documents come in as raw text, leave as a sparse matrix of exact term
counts ``f`` with shape (n_terms, n_docs): rows are vocabulary terms in
lexicographic order, columns are documents in input order.
"""

from __future__ import annotations

import importlib.resources
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "InputFormatError",
    "RawDocument",
    "TokenizerConfig",
    "Vocabulary",
    "TermDocMatrix",
    "default_stopwords",
    "load_stopwords",
    "tokenize",
    "load_corpus",
    "build_matrix",
]

CORPUS_FORMATS = ("dir-of-txt", "labeled-tsv", "lines")

# Runs of word characters, underscore excluded. Unicode-aware.
_TOKEN_RE = re.compile(r"[^\W_]+")


class InputFormatError(Exception):
    """Input data is malformed: bad TSV line, duplicate ids, empty text."""


@dataclass(frozen=True)
class RawDocument:
    """One input document before tokenization.

    ``label`` is optional; classification protocols require it, everything
    else ignores it.
    """

    doc_id: str
    text: str
    label: str | None = None


def default_stopwords() -> frozenset[str]:
    """Return the bundled English stop-word list."""
    data = importlib.resources.files("flatm").joinpath("stopwords.txt")
    return _parse_stopwords(data.read_text(encoding="utf-8").splitlines())


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Load a stop-word file: UTF-8, one word per line, '#' comments allowed."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return _parse_stopwords(lines)


def _parse_stopwords(lines: Iterable[str]) -> frozenset[str]:
    words = set()
    for line in lines:
        word = line.strip()
        if not word or word.startswith("#"):
            continue
        words.add(word)
    return frozenset(words)


@dataclass(frozen=True)
class TokenizerConfig:
    """Tokenizer knobs.

    Tokens are maximal runs of word characters (underscore excluded).
    Filters apply after optional lowercasing, in this order: minimum
    length, purely-numeric drop, stop-word removal. Stop-word entries are
    matched against the (possibly lowercased) token text verbatim.
    """

    lowercase: bool = True
    min_token_length: int = 2
    drop_numeric: bool = True
    stopwords: frozenset[str] = field(default_factory=default_stopwords)

    def __post_init__(self) -> None:
        if self.min_token_length < 1:
            raise ValueError("min_token_length must be >= 1")


def tokenize(text: str, config: TokenizerConfig | None = None) -> list[str]:
    """Split ``text`` into filtered tokens. Deterministic, order-preserving."""
    if config is None:
        config = TokenizerConfig()
    if config.lowercase:
        text = text.lower()
    out = []
    for token in _TOKEN_RE.findall(text):
        if len(token) < config.min_token_length:
            continue
        if config.drop_numeric and token.isdigit():
            continue
        if token in config.stopwords:
            continue
        out.append(token)
    return out


@dataclass(frozen=True)
class Vocabulary:
    """Immutable term list in lexicographic order with a reverse index."""

    terms: tuple[str, ...]

    def __post_init__(self) -> None:
        if list(self.terms) != sorted(set(self.terms)):
            raise ValueError("vocabulary terms must be unique and sorted")

    @cached_property
    def index(self) -> dict[str, int]:
        return {term: i for i, term in enumerate(self.terms)}

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index


@dataclass(frozen=True)
class TermDocMatrix:
    """Sparse term-document count matrix.

    ``counts`` is CSR with shape (n_terms, n_docs) and float64 values that
    are exact nonnegative integers. Row order matches the vocabulary,
    column order matches ``doc_ids``.
    """

    counts: sp.csr_matrix
    doc_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.counts.shape[1] != len(self.doc_ids):
            raise ValueError("column count does not match doc_ids")

    @property
    def n_terms(self) -> int:
        return self.counts.shape[0]

    @property
    def n_docs(self) -> int:
        return self.counts.shape[1]


def load_corpus(
    path: str | Path,
    format: str = "dir-of-txt",
    allow_empty: bool = False,
) -> list[RawDocument]:
    """Read documents from disk.

    Formats:
      * ``dir-of-txt``: every ``*.txt`` under ``path`` (recursive), one
        document per file, id = file stem, files in sorted path order.
      * ``labeled-tsv``: one ``label<TAB>text`` line per document,
        ids are 1-based line numbers.
      * ``lines``: one unlabeled document per line, same ids.

    Empty documents raise ``InputFormatError`` unless ``allow_empty``.
    An empty directory or file yields an empty list, not an error.
    """
    if format not in CORPUS_FORMATS:
        raise ValueError(f"unknown corpus format: {format!r}")
    path = Path(path)
    if format == "dir-of-txt":
        return _load_dir_of_txt(path, allow_empty)
    if not path.is_file():
        raise InputFormatError(f"not a file: {path}")
    text = path.read_text(encoding="utf-8")
    docs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if format == "labeled-tsv":
            label, sep, body = line.partition("\t")
            if not sep:
                raise InputFormatError(
                    f"{path}: line {lineno}: expected label<TAB>text"
                )
            if not label:
                raise InputFormatError(f"{path}: line {lineno}: empty label")
        else:
            label, body = None, line
        if not body.strip() and not allow_empty:
            raise InputFormatError(f"{path}: line {lineno}: empty document")
        docs.append(RawDocument(doc_id=str(lineno), text=body, label=label))
    return docs


def _load_dir_of_txt(path: Path, allow_empty: bool) -> list[RawDocument]:
    if not path.is_dir():
        raise InputFormatError(f"not a directory: {path}")
    files = sorted(path.rglob("*.txt"), key=lambda p: p.as_posix())
    docs = []
    seen: dict[str, Path] = {}
    for file in files:
        doc_id = file.stem
        if doc_id in seen:
            raise InputFormatError(
                f"duplicate document id {doc_id!r}: {seen[doc_id]} and {file}"
            )
        seen[doc_id] = file
        text = file.read_text(encoding="utf-8")
        if not text.strip() and not allow_empty:
            raise InputFormatError(f"{file}: empty document")
        docs.append(RawDocument(doc_id=doc_id, text=text))
    return docs


def build_matrix(
    docs: Sequence[RawDocument],
    config: TokenizerConfig | None = None,
    min_df: int = 1,
) -> tuple[Vocabulary, TermDocMatrix]:
    """Tokenize ``docs`` and build the count matrix.

    Terms appearing in fewer than ``min_df`` documents are pruned. Raises
    ``ValueError`` if no documents were given or every document tokenizes
    to nothing.
    """
    if not docs:
        raise ValueError("corpus is empty")
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    if config is None:
        config = TokenizerConfig()
    token_counts = [Counter(tokenize(doc.text, config)) for doc in docs]
    df: Counter[str] = Counter()
    for counts in token_counts:
        df.update(counts.keys())
    terms = sorted(t for t, d in df.items() if d >= min_df)
    if not terms:
        raise ValueError("every document tokenized to nothing; no vocabulary")
    vocab = Vocabulary(terms=tuple(terms))
    rows, cols, data = [], [], []
    for j, counts in enumerate(token_counts):
        for term, count in counts.items():
            i = vocab.index.get(term)
            if i is not None:
                rows.append(i)
                cols.append(j)
                data.append(float(count))
    counts_csr = sp.csr_matrix(
        (data, (rows, cols)), shape=(len(vocab), len(docs)), dtype=np.float64
    )
    doc_ids = tuple(doc.doc_id for doc in docs)
    return vocab, TermDocMatrix(counts=counts_csr, doc_ids=doc_ids)
