"""Filtered link-prediction metrics (rank, MRR, hits@k) and score distributions.

A *scorer* is any object with ``score_objects(s, p)``, ``score_subjects(p, o)``
and ``score_triples(array)`` where higher means more plausible.
"""
from __future__ import annotations

import json
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Triple
from .model import sigmoid

DEFAULT_KS = (1, 3, 10)


@dataclass(frozen=True)
class RankResult:
    triple: Triple
    subject_rank: float
    object_rank: float


class FilterSet:
    """All known-true triples (train + valid + test), indexed for fast filtering."""

    def __init__(self, *stores):
        self.triples = set()
        for st in stores:
            arr = st.triples if hasattr(st, "triples") else np.asarray(st).reshape(-1, 3)
            self.triples.update(map(tuple, np.asarray(arr).tolist()))
        self._objects = defaultdict(list)
        self._subjects = defaultdict(list)
        for s, p, o in self.triples:
            self._objects[(s, p)].append(o)
            self._subjects[(p, o)].append(s)
        self._objects = {k: np.array(v) for k, v in self._objects.items()}
        self._subjects = {k: np.array(v) for k, v in self._subjects.items()}

    def __contains__(self, t) -> bool:
        return tuple(int(x) for x in t) in self.triples

    def __len__(self):
        return len(self.triples)

    def known_objects(self, s, p) -> np.ndarray:
        return self._objects.get((s, p), np.zeros(0, dtype=np.int64))

    def known_subjects(self, p, o) -> np.ndarray:
        return self._subjects.get((p, o), np.zeros(0, dtype=np.int64))


class TableScorer:
    """Scorer backed by an explicit ``(E, R, E)`` score table."""

    def __init__(self, table):
        self.table = np.asarray(table, dtype=float)

    @property
    def num_entities(self):
        return self.table.shape[0]

    def score_objects(self, s, p):
        return self.table[s, p, :]

    def score_subjects(self, p, o):
        return self.table[:, p, o]

    def score_triples(self, triples):
        t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        return self.table[t[:, 0], t[:, 1], t[:, 2]]


def _rank(scores: np.ndarray, target: int, known: np.ndarray) -> float:
    x = scores[target]
    keep = np.ones(len(scores), dtype=bool)
    keep[known] = False
    keep[target] = False
    comp = scores[keep]
    return 1.0 + np.count_nonzero(comp > x) + 0.5 * np.count_nonzero(comp == x)


def filtered_rank(scorer, t, filt: FilterSet, num_entities: int | None = None) -> RankResult:
    """Rank of the true subject and object among unfiltered candidates (ties -> mean position)."""
    s, p, o = (int(x) for x in t)
    obj_scores = np.asarray(scorer.score_objects(s, p), dtype=float)
    subj_scores = np.asarray(scorer.score_subjects(p, o), dtype=float)
    if num_entities is not None and len(obj_scores) != num_entities:
        raise ValueError("scorer entity count does not match num_entities")
    return RankResult(Triple(s, p, o),
                      _rank(subj_scores, s, filt.known_subjects(p, o)),
                      _rank(obj_scores, o, filt.known_objects(s, p)))


def rank_all(scorer, test, filt: FilterSet, threads: int = 1) -> list[RankResult]:
    test = np.asarray(test.triples if hasattr(test, "triples") else test, dtype=np.int64)
    test = test.reshape(-1, 3)
    if threads <= 1:
        return [filtered_rank(scorer, t, filt) for t in test.tolist()]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: filtered_rank(scorer, t, filt), test.tolist()))


def _all_ranks(results) -> np.ndarray:
    return np.array([r for res in results for r in (res.subject_rank, res.object_rank)])


def mrr_from_ranks(results) -> float:
    return float(np.mean(1.0 / _all_ranks(results)))


def hits_from_ranks(results, k) -> float:
    return float(np.mean(_all_ranks(results) <= k))


def mrr(scorer, test, filt: FilterSet, threads: int = 1) -> float:
    if not len(test):
        raise ValueError("test set must be non-empty")
    return mrr_from_ranks(rank_all(scorer, test, filt, threads))


def hits_at_k(scorer, test, filt: FilterSet, k: int, threads: int = 1) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    return hits_from_ranks(rank_all(scorer, test, filt, threads), k)


def evaluate(scorer, test, filt: FilterSet, ks=DEFAULT_KS, threads: int = 1) -> dict:
    """MRR plus hits@k from a single ranking pass."""
    results = rank_all(scorer, test, filt, threads)
    out = {"mrr": mrr_from_ranks(results)}
    for k in ks:
        out[f"hits@{k}"] = hits_from_ranks(results, k)
    return out


def score_distributions(scorer, positives, negatives, bins: int = 20) -> dict:
    """Histograms of raw scores and of sigmoid probabilities for two triple groups.

    Score bin edges span both groups jointly, probability edges are fixed on
    [0, 1], so the two groups' histograms are directly comparable.
    """
    if not len(positives) or not len(negatives):
        raise ValueError("positives and negatives must be non-empty")
    sp = np.asarray(scorer.score_triples(positives), dtype=float)
    sn = np.asarray(scorer.score_triples(negatives), dtype=float)
    lo, hi = float(min(sp.min(), sn.min())), float(max(sp.max(), sn.max()))
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    score_edges = np.linspace(lo, hi, bins + 1)
    prob_edges = np.linspace(0.0, 1.0, bins + 1)
    out = {"score_edges": score_edges.tolist(), "prob_edges": prob_edges.tolist()}
    for name, sc in (("positive", sp), ("negative", sn)):
        pr = np.atleast_1d(sigmoid(sc))
        out[name] = {
            "score_hist": np.histogram(sc, score_edges)[0].tolist(),
            "prob_hist": np.histogram(pr, prob_edges)[0].tolist(),
            "score_mean": float(sc.mean()), "score_median": float(np.median(sc)),
            "prob_mean": float(pr.mean()), "prob_median": float(np.median(pr)),
        }
    return out


def write_metrics_report(path, metrics: dict, series=None, distributions=None) -> None:
    """Write ``metric<TAB>value`` lines to ``path`` and the same keys as JSON to ``path.json``."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in metrics.items():
            fh.write(f"{key}\t{value:.6f}\n")
    payload = dict(metrics)
    payload["series"] = list(series or [])
    if distributions is not None:
        payload["distributions"] = distributions
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def read_metrics_report(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                k, v = line.rstrip("\n").split("\t")
                out[k] = float(v)
    return out
