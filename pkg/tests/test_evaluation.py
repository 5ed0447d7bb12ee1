import json

import numpy as np
import pytest

from kgenergy.evaluation import (FilterSet, TableScorer, evaluate, filtered_rank, hits_at_k, mrr,
                                 rank_all, read_metrics_report, score_distributions,
                                 write_metrics_report)
from kgenergy.model import Kind, init

from oracles import brute_ranks


def _random_case(rng, n_e=8, n_r=2, n_known=25, n_test=6, integer=True):
    table = rng.integers(0, 4, size=(n_e, n_r, n_e)).astype(float) if integer \
        else rng.normal(size=(n_e, n_r, n_e))
    known = {tuple(x) for x in np.stack([rng.integers(n_e, size=n_known), rng.integers(n_r, size=n_known),
                                         rng.integers(n_e, size=n_known)], 1).tolist()}
    test = list(known)[:n_test]
    return table, known, test


def test_hand_example():
    # object scores for (0, 0, .): [5, 9, 9, 1]; entity 1 is a known true object -> filtered
    table = np.zeros((4, 1, 4))
    table[0, 0] = [5, 9, 9, 1]
    filt = FilterSet([(0, 0, 1), (0, 0, 3)])
    r = filtered_rank(TableScorer(table), (0, 0, 3), filt)
    # remaining competitors 0 (5) and 2 (9) both beat 1 -> rank 3
    assert r.object_rank == 3
    r = filtered_rank(TableScorer(table), (0, 0, 1), filt)
    # competitor 2 ties at 9 -> mean position 1.5
    assert r.object_rank == 1.5


def test_matches_sort_oracle(rng):
    for _ in range(20):
        table, known, test = _random_case(rng)
        filt = FilterSet(list(known))
        got = rank_all(TableScorer(table), test, filt)
        want = brute_ranks(table, test, known)
        assert [(r.subject_rank, r.object_rank) for r in got] == want


def test_metrics_from_oracle(rng):
    table, known, test = _random_case(rng, integer=False)
    filt = FilterSet(list(known))
    ranks = np.array(brute_ranks(table, test, known)).ravel()
    sc = TableScorer(table)
    assert mrr(sc, test, filt) == pytest.approx(np.mean(1 / ranks))
    for k in (1, 3, 10):
        assert hits_at_k(sc, test, filt, k) == pytest.approx(np.mean(ranks <= k))
    m = evaluate(sc, test, filt, threads=3)
    assert set(m) == {"mrr", "hits@1", "hits@3", "hits@10"}


def test_perfect_model_scores_one():
    n = 5
    table = np.full((n, 1, n), -1.0)
    test = [(i, 0, (i + 1) % n) for i in range(n)]
    for s, _, o in test:
        table[s, 0, o] = 1.0
    assert mrr(TableScorer(table), test, FilterSet(test)) == 1.0


def test_space_scorer_matches_table(rng):
    space = init(6, 2, 3, Kind.FULL, sigma=1.0, seed=rng)
    test = [(0, 1, 2), (3, 0, 5)]
    filt = FilterSet(test + [(0, 1, 4)])
    a = rank_all(space, test, filt)
    b = rank_all(TableScorer(space.score_table()), test, filt)
    assert a == b


def test_validation():
    with pytest.raises(ValueError):
        hits_at_k(TableScorer(np.zeros((2, 1, 2))), [(0, 0, 1)], FilterSet([]), 0)
    with pytest.raises(ValueError):
        mrr(TableScorer(np.zeros((2, 1, 2))), [], FilterSet([]))


def test_distributions():
    table = np.zeros((3, 1, 3))
    table[0, 0, 1] = 4.0
    d = score_distributions(TableScorer(table), [(0, 0, 1)], [(1, 0, 2), (2, 0, 0)], bins=4)
    assert sum(d["positive"]["score_hist"]) == 1 and sum(d["negative"]["prob_hist"]) == 2
    assert d["positive"]["score_mean"] == 4.0
    assert len(d["score_edges"]) == 5
    same = score_distributions(TableScorer(np.zeros((2, 1, 2))), [(0, 0, 1)], [(1, 0, 0)])
    assert same["score_edges"][0] < same["score_edges"][-1]


def test_report_roundtrip(tmp_path):
    path = tmp_path / "m.tsv"
    write_metrics_report(path, {"mrr": 0.5, "hits@1": 0.25}, series=[{"epoch": 1, "mrr": 0.4}])
    assert read_metrics_report(path) == {"mrr": 0.5, "hits@1": 0.25}
    js = json.loads((tmp_path / "m.tsv.json").read_text())
    assert js["series"][0]["epoch"] == 1
