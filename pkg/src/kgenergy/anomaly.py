"""Suspiciousness of novel triples, ranked alert lists, and severity-ordering quality."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import LabeledEvent, SeverityClass, Triple, Vocabulary
from .errors import UnknownSymbolError
from .model import sigmoid


@dataclass
class TrainedModel:
    """Parameters plus the model kind that decides how scores become suspiciousness."""

    model_kind: str
    params: object
    vocab: Vocabulary | None = None

    @property
    def num_entities(self):
        return self.params.num_entities

    @property
    def num_relations(self):
        return self.params.num_relations


@dataclass(frozen=True)
class Suspiciousness:
    triple: Triple
    value: float
    model_kind: str
    label: SeverityClass | None = None


@dataclass
class RankedAlerts:
    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


def _validate(model: TrainedModel, triples: np.ndarray) -> None:
    for s, p, o in triples.tolist():
        for idx, kind, limit in ((s, "entity", model.num_entities),
                                 (p, "relation", model.num_relations),
                                 (o, "entity", model.num_entities)):
            if not 0 <= idx < limit:
                raise UnknownSymbolError(idx, kind)


def suspiciousness_values(model: TrainedModel, triples) -> np.ndarray:
    t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    _validate(model, t)
    kind = model.model_kind
    if kind == "transe":
        return model.params.distances(t)
    f = model.params.score_triples(t)
    if kind in ("enm", "enmd"):
        return np.atleast_1d(1.0 - sigmoid(f))
    if kind == "rese":
        return 1.0 - f
    if kind == "rekl":
        return -f
    raise ValueError(f"unknown model kind {kind!r}")


def suspiciousness(model: TrainedModel, t) -> float:
    return float(suspiciousness_values(model, [tuple(t)])[0])


def encode_events(vocab: Vocabulary, raw_events, skip_unknown: bool = False):
    """Turn ``((s, p, o), label[, line])`` name records into :class:`LabeledEvent`.

    Returns ``(events, unknown)``; ``unknown`` lists ``UnknownSymbolError``
    instances (with line numbers when given). Without ``skip_unknown`` the
    first unknown symbol is raised.
    """
    events, unknown = [], []
    for rec in raw_events:
        (s, p, o), label = rec[0], rec[1]
        line = rec[2] if len(rec) > 2 else None
        try:
            t = vocab.encode_triple(s, p, o)
        except UnknownSymbolError as exc:
            err = UnknownSymbolError(exc.symbol, exc.kind, line)
            if not skip_unknown:
                raise err from None
            unknown.append(err)
            continue
        events.append(LabeledEvent(t, SeverityClass(label)))
    return events, unknown


def score_events(model: TrainedModel, events) -> list[Suspiciousness]:
    if not events:
        return []
    triples = np.array([tuple(e.triple) for e in events], dtype=np.int64)
    values = suspiciousness_values(model, triples)
    return [Suspiciousness(Triple(*map(int, e.triple)), float(v), model.model_kind, e.label)
            for e, v in zip(events, values)]


def rank_alerts(scored, entity_filter: int | None = None) -> RankedAlerts:
    """Sort descending by suspiciousness; ties broken by ascending (s, p, o)."""
    items = list(scored)
    if entity_filter is not None:
        items = [x for x in items if entity_filter in (x.triple.s, x.triple.o)]
    items.sort(key=lambda x: (-x.value, tuple(x.triple)))
    return RankedAlerts(items)


def severity_ordering_accuracy(scored) -> float:
    """Fraction of differently-labelled pairs where the more severe event scores higher.

    Ties count one half. Computed per pair of classes with sorted search, so
    the cost is O(n log n) rather than quadratic.
    """
    labels = np.array([int(x.label) for x in scored])
    values = np.array([x.value for x in scored], dtype=float)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("need at least two distinct severity classes")
    by_class = {c: np.sort(values[labels == c]) for c in classes}
    good, total = 0.0, 0
    for i, lo in enumerate(classes):
        low_vals = by_class[lo]
        for hi in classes[i + 1:]:
            hv = by_class[hi]
            below = np.searchsorted(low_vals, hv, side="left")
            equal = np.searchsorted(low_vals, hv, side="right") - below
            good += below.sum() + 0.5 * equal.sum()
            total += len(hv) * len(low_vals)
    return float(good / total)


def mean_by_class(scored) -> dict:
    out = {}
    for cls in SeverityClass:
        vals = [x.value for x in scored if x.label == cls]
        if vals:
            out[cls] = float(np.mean(vals))
    return out


def write_alert_report(path, alerts: RankedAlerts, vocab: Vocabulary | None = None) -> None:
    """TSV ``rank, subject, predicate, object, suspiciousness, label``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rank, a in enumerate(alerts, start=1):
            names = vocab.decode_triple(a.triple) if vocab is not None else tuple(a.triple)
            label = a.label.label if a.label is not None else ""
            fh.write(f"{rank}\t{names[0]}\t{names[1]}\t{names[2]}\t{a.value:.10g}\t{label}\n")
