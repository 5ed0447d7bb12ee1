import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgenergy.core import (SeverityClass, Triple, TripleStore, Vocabulary, build_vocabulary, decode,
                           encode, iterate_batches, load_dataset_dir, parse_labeled_events,
                           parse_triples, read_triples, split, write_labeled_events, write_triples)
from kgenergy.errors import ParseError, UnknownSymbolError


def test_parse_skips_comments_blank_and_crlf():
    text = "# header\r\na\tr\tb\r\n\r\nb\tr\tc\n"
    assert parse_triples(text) == [("a", "r", "b"), ("b", "r", "c")]


def test_parse_wrong_field_count_reports_line():
    with pytest.raises(ParseError) as exc:
        parse_triples("a\tr\tb\nbad line\n", source="f.txt")
    assert exc.value.line == 2
    assert "f.txt" in str(exc.value)


def test_parse_empty_field():
    with pytest.raises(ParseError):
        parse_triples("a\t\tb\n")


def test_labeled_events_roundtrip(tmp_path):
    events = [(("a", "r", "b"), SeverityClass.SUSPICIOUS), (("b", "r", "a"), SeverityClass.OBSERVED)]
    path = tmp_path / "ev.txt"
    write_labeled_events(path, events)
    back = parse_labeled_events(path.read_text())
    assert [(t, lab) for t, lab, _ in back] == events
    assert back[1][2] == 2


def test_bad_label():
    with pytest.raises(ParseError):
        parse_labeled_events("a\tr\tb\tweird\n")


def test_severity_labels():
    for cls in SeverityClass:
        assert SeverityClass.from_label(cls.label) is cls
    assert SeverityClass.HIGHLY_SUSPICIOUS > SeverityClass.OBSERVED


def test_vocabulary_order_and_unknown():
    vocab = build_vocabulary([("x", "r1", "y"), ("z", "r2", "x")])
    assert vocab.entity_names == ("x", "y", "z")
    assert vocab.relation_names == ("r1", "r2")
    with pytest.raises(UnknownSymbolError) as exc:
        vocab.encode_triple("x", "nope", "y")
    assert exc.value.kind == "relation"


def test_vocabulary_rejects_duplicates():
    with pytest.raises(ValueError):
        Vocabulary(("a", "a"), ("r",))


def test_encode_decode_keeps_duplicates():
    raw = [("a", "r", "b"), ("a", "r", "b"), ("b", "r", "c")]
    vocab = build_vocabulary(raw)
    store = encode(vocab, raw)
    assert len(store) == 3
    assert len(store.membership) == 2
    assert decode(vocab, store) == raw
    assert Triple(0, 0, 1) in store


def test_store_range_checks():
    with pytest.raises(ValueError):
        TripleStore([(0, 0, 5)], num_entities=3)
    with pytest.raises(ValueError):
        TripleStore([(0, -1, 1)])


def test_file_roundtrip(tmp_path):
    raw = [("a", "r", "b"), ("c", "s", "d")]
    path = tmp_path / "t.txt"
    write_triples(path, raw, header="demo")
    assert read_triples(path) == raw


def test_load_dataset_dir(tmp_path):
    write_triples(tmp_path / "train.txt", [("a", "r", "b")])
    write_triples(tmp_path / "test.txt", [("b", "r", "a")])
    d = load_dataset_dir(tmp_path)
    assert set(d) == {"train", "test"}


def test_split_partitions_unique_set():
    rng = np.random.default_rng(0)
    arr = rng.integers(0, 6, size=(200, 3))
    store = TripleStore(arr)
    train, test = split(store, 0.2, seed=3)
    uniq = {tuple(t) for t in store.unique().tolist()}
    a = {tuple(t) for t in train.triples.tolist()}
    b = {tuple(t) for t in test.triples.tolist()}
    assert a | b == uniq and not a & b
    assert len(b) == round(0.2 * len(uniq))
    again = split(store, 0.2, seed=3)
    assert np.array_equal(again[1].triples, test.triples)


def test_split_bad_fraction():
    with pytest.raises(ValueError):
        split(TripleStore([(0, 0, 1)]), 1.0, seed=0)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(0, 60), bs=st.integers(1, 17), seed=st.integers(0, 1000))
def test_batches_cover_every_triple_once(n, bs, seed):
    arr = np.arange(3 * n).reshape(n, 3)
    batches = list(iterate_batches(arr, bs, seed))
    assert all(len(b) <= bs for b in batches)
    got = np.concatenate(batches) if batches else np.zeros((0, 3))
    assert sorted(map(tuple, got.tolist())) == sorted(map(tuple, arr.tolist()))


def test_batches_deterministic():
    arr = np.arange(300).reshape(100, 3)
    a = [b.tolist() for b in iterate_batches(arr, 7, 5)]
    b = [b.tolist() for b in iterate_batches(arr, 7, np.random.default_rng(5))]
    assert a == b
