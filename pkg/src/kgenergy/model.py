"""Bilinear (RESCAL / DistMult) and translational embeddings, probabilities and graph energy.

The energy model assigns a graph indicator tensor ``X`` (shape ``(E, R, E)``)
the energy ``-sum(X * f)`` with ``f(s, p, o) = e_s^T R_p e_o``. Because every
triple slot is an independent Bernoulli variable, the partition function
factorises into ``prod(1 + exp(f))`` over all slots (self-loops included).
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .core import Triple

# Full enumeration of 2**slots graph states is only done for tiny universes.
MAX_ORACLE_SLOTS = 20


class Kind(enum.Enum):
    FULL = "full"
    DIAGONAL = "diagonal"


def softplus(x):
    """Stable ``log(1 + exp(x))``."""
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x):
    """Logistic function without overflow for large ``|x|``."""
    x = np.asarray(x, dtype=float)
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return out if out.ndim else float(out)


def log_sigmoid(x):
    return -softplus(-np.asarray(x, dtype=float))


@dataclass
class EmbeddingSpace:
    """Entity vectors ``(E, N)`` and relation matrices ``(R, N, N)`` (or ``(R, N)`` if diagonal)."""

    entities: np.ndarray
    relations: np.ndarray
    kind: Kind = Kind.FULL

    def __post_init__(self):
        self.kind = Kind(self.kind)
        self.entities = np.asarray(self.entities, dtype=float)
        self.relations = np.asarray(self.relations, dtype=float)
        if self.entities.ndim != 2 or self.entities.shape[1] < 1:
            raise ValueError("entities must have shape (E, N) with N >= 1")
        n = self.entities.shape[1]
        want = (n, n) if self.kind is Kind.FULL else (n,)
        if self.relations.shape[1:] != want:
            raise ValueError(f"relations must have trailing shape {want}, got {self.relations.shape[1:]}")
        if not (np.isfinite(self.entities).all() and np.isfinite(self.relations).all()):
            raise ValueError("embedding values must be finite")

    @property
    def dim(self) -> int:
        return self.entities.shape[1]

    @property
    def num_entities(self) -> int:
        return self.entities.shape[0]

    @property
    def num_relations(self) -> int:
        return self.relations.shape[0]

    def copy(self) -> "EmbeddingSpace":
        return EmbeddingSpace(self.entities.copy(), self.relations.copy(), self.kind)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.entities).all() and np.isfinite(self.relations).all())

    # bilinear building blocks, shared with the gradient code
    def left(self, s, p) -> np.ndarray:
        """``e_s^T R_p`` for index arrays ``s``, ``p``."""
        es = self.entities[s]
        if self.kind is Kind.DIAGONAL:
            return es * self.relations[p]
        return np.einsum("...i,...ij->...j", es, self.relations[p])

    def right(self, p, o) -> np.ndarray:
        """``R_p e_o`` for index arrays ``p``, ``o``."""
        eo = self.entities[o]
        if self.kind is Kind.DIAGONAL:
            return self.relations[p] * eo
        return np.einsum("...ij,...j->...i", self.relations[p], eo)

    def score_triples(self, triples) -> np.ndarray:
        t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        if self.kind is Kind.DIAGONAL:
            # e_s * e_o first: elementwise products commute exactly, so f(s,p,o) == f(o,p,s) bitwise
            pair = self.entities[t[:, 0]] * self.entities[t[:, 2]]
            return np.sum(pair * self.relations[t[:, 1]], axis=1)
        return np.einsum("ni,ni->n", self.left(t[:, 0], t[:, 1]), self.entities[t[:, 2]])

    def score_objects(self, s: int, p: int) -> np.ndarray:
        return self.entities @ self.left(s, p)

    def score_subjects(self, p: int, o: int) -> np.ndarray:
        return self.entities @ self.right(p, o)

    def score_table(self) -> np.ndarray:
        """All scores as an ``(E, R, E)`` array."""
        e = self.entities
        if self.kind is Kind.DIAGONAL:
            return np.einsum("si,pi,oi->spo", e, self.relations, e)
        return np.einsum("si,pij,oj->spo", e, self.relations, e)


@dataclass
class TransEParams:
    entities: np.ndarray
    relations: np.ndarray

    def __post_init__(self):
        self.entities = np.asarray(self.entities, dtype=float)
        self.relations = np.asarray(self.relations, dtype=float)
        if self.entities.ndim != 2 or self.relations.ndim != 2:
            raise ValueError("TransE entities and relations must be 2-D")
        if self.entities.shape[1] != self.relations.shape[1] or self.entities.shape[1] < 1:
            raise ValueError("inconsistent TransE dimensions")
        if not (np.isfinite(self.entities).all() and np.isfinite(self.relations).all()):
            raise ValueError("embedding values must be finite")

    @property
    def dim(self) -> int:
        return self.entities.shape[1]

    @property
    def num_entities(self) -> int:
        return self.entities.shape[0]

    @property
    def num_relations(self) -> int:
        return self.relations.shape[0]

    def copy(self) -> "TransEParams":
        return TransEParams(self.entities.copy(), self.relations.copy())

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.entities).all() and np.isfinite(self.relations).all())

    def distances(self, triples) -> np.ndarray:
        t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        d = self.entities[t[:, 0]] + self.relations[t[:, 1]] - self.entities[t[:, 2]]
        return np.linalg.norm(d, axis=1)

    # ranking uses "higher is more plausible", hence the negated distance
    def score_triples(self, triples) -> np.ndarray:
        return -self.distances(triples)

    def score_objects(self, s: int, p: int) -> np.ndarray:
        return -np.linalg.norm(self.entities[s] + self.relations[p] - self.entities, axis=1)

    def score_subjects(self, p: int, o: int) -> np.ndarray:
        return -np.linalg.norm(self.entities + self.relations[p] - self.entities[o], axis=1)


def init(num_entities: int, num_relations: int, dim: int, kind=Kind.FULL,
         mu: float = 0.0, sigma: float = 0.1, seed=0) -> EmbeddingSpace:
    """Draw every parameter i.i.d. from ``N(mu, sigma**2)``."""
    if num_entities < 1 or num_relations < 1:
        raise ValueError("need at least one entity and one relation")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    kind = Kind(kind)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ents = rng.normal(mu, sigma, size=(num_entities, dim))
    rshape = (num_relations, dim, dim) if kind is Kind.FULL else (num_relations, dim)
    rels = rng.normal(mu, sigma, size=rshape)
    return EmbeddingSpace(ents, rels, kind)


def init_transe(num_entities: int, num_relations: int, dim: int,
                mu: float = 0.0, sigma: float = 1.0, seed=0) -> TransEParams:
    if num_entities < 1 or num_relations < 1:
        raise ValueError("need at least one entity and one relation")
    if dim < 1 or sigma < 0:
        raise ValueError("invalid dim or sigma")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return TransEParams(rng.normal(mu, sigma, size=(num_entities, dim)),
                        rng.normal(mu, sigma, size=(num_relations, dim)))


def score(space: EmbeddingSpace, t) -> float:
    return float(space.score_triples([tuple(t)])[0])


def prob(space: EmbeddingSpace, t) -> float:
    return float(sigmoid(score(space, t)))


def score_transe(params: TransEParams, t) -> float:
    return float(params.distances([tuple(t)])[0])


def score_all_objects(space, s: int, p: int) -> np.ndarray:
    return space.score_objects(s, p)


def score_all_subjects(space, p: int, o: int) -> np.ndarray:
    return space.score_subjects(p, o)


# -- graph-level quantities ------------------------------------------------

def graph_indicator(triples, num_entities: int, num_relations: int) -> np.ndarray:
    """Dense 0/1 tensor ``X[s, p, o]`` for a set of triples (oracle use)."""
    x = np.zeros((num_entities, num_relations, num_entities), dtype=np.int8)
    t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    x[t[:, 0], t[:, 1], t[:, 2]] = 1
    return x


def _check_x(space, x):
    x = np.asarray(x)
    want = (space.num_entities, space.num_relations, space.num_entities)
    if x.shape != want:
        raise ValueError(f"indicator shape {x.shape} does not match space {want}")
    return x


def graph_energy(space: EmbeddingSpace, x) -> float:
    x = _check_x(space, x)
    return float(-np.sum(x * space.score_table()))


def log_partition_closed(space: EmbeddingSpace, num_entities: int | None = None,
                         num_relations: int | None = None) -> float:
    """``log Z = sum over all (s, p, o) of softplus(f(s, p, o))``."""
    table = space.score_table()
    if num_entities is not None and num_relations is not None:
        table = table[:num_entities, :num_relations, :num_entities]
    return float(np.sum(softplus(table)))


def log_prob_graph(space: EmbeddingSpace, x, num_entities: int | None = None,
                   num_relations: int | None = None) -> float:
    """``log p(X) = -E(X) - log Z``."""
    return -graph_energy(space, x) - log_partition_closed(space, num_entities, num_relations)


def log_prob_graph_product(space: EmbeddingSpace, x) -> float:
    """Same quantity via independent Bernoulli factors ``sigma(f)`` / ``1 - sigma(f)``."""
    x = _check_x(space, x).astype(bool)
    table = space.score_table()
    return float(np.sum(log_sigmoid(table[x])) + np.sum(log_sigmoid(-table[~x])))


def enumerate_graphs(num_entities: int, num_relations: int):
    """Yield every binary indicator tensor of the universe (capped at MAX_ORACLE_SLOTS slots)."""
    shape = (num_entities, num_relations, num_entities)
    slots = int(np.prod(shape))
    if slots > MAX_ORACLE_SLOTS:
        raise ValueError(f"universe has {slots} slots; enumeration capped at {MAX_ORACLE_SLOTS}")
    for bits in itertools.product((0, 1), repeat=slots):
        yield np.array(bits, dtype=np.int8).reshape(shape)
