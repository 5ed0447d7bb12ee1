import itertools

import numpy as np
import pytest

from kgenergy.anomaly import (Suspiciousness, TrainedModel, encode_events, mean_by_class, rank_alerts,
                              score_events, severity_ordering_accuracy, suspiciousness,
                              suspiciousness_values, write_alert_report)
from kgenergy.core import LabeledEvent, SeverityClass, Triple, build_vocabulary
from kgenergy.errors import UnknownSymbolError
from kgenergy.model import Kind, init, init_transe, sigmoid


def _sus(vals_labels):
    return [Suspiciousness(Triple(i, 0, i), v, "enm", SeverityClass(lab))
            for i, (v, lab) in enumerate(vals_labels)]


def test_value_per_model_kind():
    space = init(4, 2, 3, Kind.FULL, sigma=1.0, seed=0)
    t = (1, 1, 2)
    f = space.score_triples([t])[0]
    assert suspiciousness(TrainedModel("enm", space), t) == pytest.approx(1 - sigmoid(f))
    assert suspiciousness(TrainedModel("rese", space), t) == pytest.approx(1 - f)
    assert suspiciousness(TrainedModel("rekl", space), t) == pytest.approx(-f)
    tr = init_transe(4, 2, 3, seed=0)
    assert suspiciousness(TrainedModel("transe", tr), t) == pytest.approx(tr.distances([t])[0])


def test_unknown_index_rejected():
    model = TrainedModel("enm", init(3, 1, 2, seed=0))
    with pytest.raises(UnknownSymbolError):
        suspiciousness_values(model, [(0, 0, 3)])
    with pytest.raises(UnknownSymbolError):
        suspiciousness_values(model, [(0, 1, 0)])


def test_encode_events_unknown_symbols():
    vocab = build_vocabulary([("a", "r", "b")])
    raw = [(("a", "r", "b"), SeverityClass.OBSERVED, 1), (("a", "r", "zz"), SeverityClass.EXPECTED, 2)]
    with pytest.raises(UnknownSymbolError) as exc:
        encode_events(vocab, raw)
    assert exc.value.line == 2
    events, unknown = encode_events(vocab, raw, skip_unknown=True)
    assert len(events) == 1 and unknown[0].symbol == "zz"


def test_rank_alerts_sorting_and_filter():
    items = [Suspiciousness(Triple(2, 0, 1), 0.5, "enm"), Suspiciousness(Triple(0, 0, 1), 0.5, "enm"),
             Suspiciousness(Triple(3, 0, 3), 0.9, "enm")]
    ranked = rank_alerts(items)
    assert [tuple(a.triple) for a in ranked] == [(3, 0, 3), (0, 0, 1), (2, 0, 1)]
    assert len(rank_alerts(items, entity_filter=1)) == 2
    assert len(rank_alerts(items, entity_filter=9)) == 0


def test_ordering_accuracy_perfect_and_reversed():
    perfect = _sus([(0.1, 0), (0.2, 1), (0.3, 2), (0.4, 3), (0.5, 4)])
    assert severity_ordering_accuracy(perfect) == 1.0
    reverse = _sus([(0.5, 0), (0.4, 1), (0.3, 2), (0.2, 3), (0.1, 4)])
    assert severity_ordering_accuracy(reverse) == 0.0
    ties = _sus([(0.3, 0), (0.3, 4)])
    assert severity_ordering_accuracy(ties) == 0.5
    with pytest.raises(ValueError):
        severity_ordering_accuracy(_sus([(0.1, 2), (0.2, 2)]))


def test_ordering_accuracy_matches_pairwise_oracle(rng):
    vals = rng.integers(0, 6, size=60).astype(float)
    labs = rng.integers(0, 5, size=60)
    scored = _sus(zip(vals, labs))
    good = total = 0
    for a, b in itertools.combinations(scored, 2):
        if a.label == b.label:
            continue
        hi, lo = (a, b) if a.label > b.label else (b, a)
        total += 1
        good += 1.0 if hi.value > lo.value else 0.5 if hi.value == lo.value else 0.0
    assert severity_ordering_accuracy(scored) == pytest.approx(good / total)


def test_score_events_and_report(tmp_path):
    vocab = build_vocabulary([("a", "r", "b"), ("b", "r", "c")])
    space = init(3, 1, 2, seed=1)
    model = TrainedModel("enmd", space, vocab)
    events = [LabeledEvent(Triple(0, 0, 1), SeverityClass.OBSERVED),
              LabeledEvent(Triple(2, 0, 0), SeverityClass.SUSPICIOUS)]
    scored = score_events(model, events)
    assert mean_by_class(scored)[SeverityClass.OBSERVED] == scored[0].value
    path = tmp_path / "alerts.tsv"
    write_alert_report(path, rank_alerts(scored), vocab)
    rows = [ln.split("\t") for ln in path.read_text().splitlines()]
    assert [r[0] for r in rows] == ["1", "2"]
    assert {r[5] for r in rows} == {"observed", "suspicious"}
    assert float(rows[0][4]) >= float(rows[1][4])
    assert score_events(model, []) == []
