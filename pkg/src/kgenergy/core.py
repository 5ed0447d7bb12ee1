"""Vocabularies, integer-encoded triples, triple files, splitting and batching.

Triples are carried around as ``(n, 3)`` integer arrays with columns
``(subject, predicate, object)``; :class:`Triple` is the scalar view used at
API boundaries.
"""
from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import ParseError, UnknownSymbolError


class Triple(NamedTuple):
    s: int
    p: int
    o: int


class SeverityClass(enum.IntEnum):
    """Ordered severity labels; larger value means more severe."""

    OBSERVED = 0
    EXPECTED = 1
    UNEXPECTED = 2
    SUSPICIOUS = 3
    HIGHLY_SUSPICIOUS = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "SeverityClass":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown severity label {label!r}") from None


@dataclass(frozen=True)
class LabeledEvent:
    triple: Triple
    label: SeverityClass


@dataclass(frozen=True)
class Vocabulary:
    entity_names: tuple = ()
    relation_names: tuple = ()
    _entity_index: dict = field(init=False, repr=False, compare=False)
    _relation_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ents = tuple(self.entity_names)
        rels = tuple(self.relation_names)
        if len(set(ents)) != len(ents) or len(set(rels)) != len(rels):
            raise ValueError("vocabulary names must be unique")
        object.__setattr__(self, "entity_names", ents)
        object.__setattr__(self, "relation_names", rels)
        object.__setattr__(self, "_entity_index", {n: i for i, n in enumerate(ents)})
        object.__setattr__(self, "_relation_index", {n: i for i, n in enumerate(rels)})

    @property
    def num_entities(self) -> int:
        return len(self.entity_names)

    @property
    def num_relations(self) -> int:
        return len(self.relation_names)

    def entity_index(self, name: str) -> int:
        try:
            return self._entity_index[name]
        except KeyError:
            raise UnknownSymbolError(name, "entity") from None

    def relation_index(self, name: str) -> int:
        try:
            return self._relation_index[name]
        except KeyError:
            raise UnknownSymbolError(name, "relation") from None

    def encode_triple(self, s: str, p: str, o: str) -> Triple:
        return Triple(self.entity_index(s), self.relation_index(p), self.entity_index(o))

    def decode_triple(self, t) -> tuple[str, str, str]:
        s, p, o = (int(x) for x in t)
        return self.entity_names[s], self.relation_names[p], self.entity_names[o]


def _as_triple_array(triples) -> np.ndarray:
    arr = np.asarray(triples, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 3), dtype=np.int64)
    return arr.reshape(-1, 3)


class TripleStore:
    """Ordered (possibly repeating) list of index triples plus a membership set.

    The list keeps duplicates so repeated observations weigh more during
    training; ``membership`` is the deduplicated set.
    """

    def __init__(self, triples, num_entities: int | None = None, num_relations: int | None = None):
        arr = _as_triple_array(triples).copy()
        arr.setflags(write=False)
        self._triples = arr
        self.membership = frozenset(map(tuple, arr.tolist()))
        if len(arr):
            if (arr < 0).any():
                raise ValueError("triple indices must be non-negative")
            if num_entities is not None and max(arr[:, 0].max(), arr[:, 2].max()) >= num_entities:
                raise ValueError("entity index out of range")
            if num_relations is not None and arr[:, 1].max() >= num_relations:
                raise ValueError("relation index out of range")

    @property
    def triples(self) -> np.ndarray:
        return self._triples

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        for s, p, o in self._triples.tolist():
            yield Triple(s, p, o)

    def __contains__(self, t) -> bool:
        return tuple(int(x) for x in t) in self.membership

    def unique(self) -> np.ndarray:
        """Deduplicated triples in lexicographic order."""
        if not len(self._triples):
            return self._triples
        return np.unique(self._triples, axis=0)

    def __repr__(self):
        return f"TripleStore(n={len(self)}, unique={len(self.membership)})"


# -- parsing ---------------------------------------------------------------

def _iter_records(text, ncols: int, source=None) -> Iterator[tuple[int, list[str]]]:
    if isinstance(text, str):
        text = io.StringIO(text)
    for lineno, raw in enumerate(text, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != ncols:
            raise ParseError(f"expected {ncols} tab-separated fields, got {len(fields)}",
                             line=lineno, source=source)
        if any(not f for f in fields):
            raise ParseError("empty field", line=lineno, source=source)
        yield lineno, fields


def parse_triples(text, source=None) -> list[tuple[str, str, str]]:
    """Parse ``subject<TAB>predicate<TAB>object`` lines.

    ``text`` is a string or any iterable of lines. Blank lines and lines
    starting with ``#`` are skipped.
    """
    return [tuple(f) for _, f in _iter_records(text, 3, source)]


def parse_labeled_events(text, source=None) -> list[tuple[tuple[str, str, str], SeverityClass, int]]:
    """Parse 4-column labeled event lines; returns ``((s, p, o), label, line_number)``."""
    out = []
    for lineno, (s, p, o, label) in _iter_records(text, 4, source):
        try:
            sev = SeverityClass.from_label(label)
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, source=source) from None
        out.append(((s, p, o), sev, lineno))
    return out


def read_triples(path) -> list[tuple[str, str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_triples(fh, source=str(path))


def read_labeled_events(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_labeled_events(fh, source=str(path))


def write_triples(path, triples: Iterable[Sequence[str]], header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(f"# {header}\n")
        for s, p, o in triples:
            fh.write(f"{s}\t{p}\t{o}\n")


def write_labeled_events(path, events: Iterable[tuple[Sequence[str], SeverityClass]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (s, p, o), label in events:
            fh.write(f"{s}\t{p}\t{o}\t{SeverityClass(label).label}\n")


# -- vocabulary / encoding -------------------------------------------------

def build_vocabulary(triples: Iterable[Sequence[str]]) -> Vocabulary:
    """Collect entities (subject and object positions) and relations in first-appearance order."""
    ents: dict[str, None] = {}
    rels: dict[str, None] = {}
    for s, p, o in triples:
        ents.setdefault(s)
        rels.setdefault(p)
        ents.setdefault(o)
    return Vocabulary(tuple(ents), tuple(rels))


def encode(vocab: Vocabulary, triples: Iterable[Sequence[str]]) -> TripleStore:
    idx = [vocab.encode_triple(s, p, o) for s, p, o in triples]
    return TripleStore(idx, vocab.num_entities, vocab.num_relations)


def decode(vocab: Vocabulary, store) -> list[tuple[str, str, str]]:
    arr = store.triples if isinstance(store, TripleStore) else _as_triple_array(store)
    return [vocab.decode_triple(t) for t in arr.tolist()]


# -- split / batches -------------------------------------------------------

def split(store: TripleStore, test_fraction: float, seed: int) -> tuple[TripleStore, TripleStore]:
    """Random disjoint train/test partition of the *deduplicated* triple set."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    uniq = store.unique()
    if not len(uniq):
        raise ValueError("cannot split an empty store")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(uniq))
    n_test = int(round(test_fraction * len(uniq)))
    return TripleStore(uniq[perm[n_test:]]), TripleStore(uniq[perm[:n_test]])


def iterate_batches(store, batch_size: int, seed) -> Iterator[np.ndarray]:
    """Yield shuffled mini-batches covering every listed triple exactly once.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    arr = store.triples if isinstance(store, TripleStore) else _as_triple_array(store)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    perm = rng.permutation(len(arr))
    for start in range(0, len(arr), batch_size):
        yield arr[perm[start:start + batch_size]]


def load_dataset_dir(path) -> dict[str, list[tuple[str, str, str]]]:
    """Read ``train.txt``/``valid.txt``/``test.txt`` from a directory (missing files skipped)."""
    path = Path(path)
    out = {}
    for name in ("train", "valid", "test"):
        f = path / f"{name}.txt"
        if f.exists():
            out[name] = read_triples(f)
    return out
