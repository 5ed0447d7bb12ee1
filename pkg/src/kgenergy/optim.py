"""Row-sparse Adagrad and Adam.

Both optimizers minimise: ``params -= lr * direction(grad)``. Only rows listed
in ``GradientSet.entity_rows`` / ``relation_rows`` are touched, so entities and
relations absent from a batch keep their values (and, for Adam, their moment
estimates and per-row step counters).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GradientSet:
    """Dense gradient buffers plus the rows that may be nonzero."""

    entities: np.ndarray
    relations: np.ndarray
    entity_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    relation_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @classmethod
    def zeros_like(cls, params) -> "GradientSet":
        return cls(np.zeros_like(params.entities), np.zeros_like(params.relations))

    def __add__(self, other: "GradientSet") -> "GradientSet":
        return GradientSet(self.entities + other.entities, self.relations + other.relations,
                           np.union1d(self.entity_rows, other.entity_rows),
                           np.union1d(self.relation_rows, other.relation_rows))

    def scaled(self, c: float) -> "GradientSet":
        return GradientSet(self.entities * c, self.relations * c,
                           self.entity_rows.copy(), self.relation_rows.copy())

    def negated(self) -> "GradientSet":
        return self.scaled(-1.0)

    def max_abs(self) -> float:
        return float(max(np.abs(self.entities).max(initial=0.0),
                         np.abs(self.relations).max(initial=0.0)))


class Adagrad:
    name = "adagrad"

    def __init__(self, lr: float = 0.01, eps: float = 1e-10):
        self.lr = lr
        self.eps = eps
        self.acc_entities = None
        self.acc_relations = None

    def _ensure(self, params):
        if self.acc_entities is None:
            self.acc_entities = np.zeros_like(params.entities)
            self.acc_relations = np.zeros_like(params.relations)

    def _update(self, value, acc, grad, rows, lr):
        g = grad[rows]
        acc[rows] += g * g
        value[rows] -= lr * g / np.sqrt(acc[rows] + self.eps)

    def step(self, params, grads: GradientSet, lr: float | None = None):
        lr = self.lr if lr is None else lr
        self._ensure(params)
        self._update(params.entities, self.acc_entities, grads.entities, grads.entity_rows, lr)
        self._update(params.relations, self.acc_relations, grads.relations, grads.relation_rows, lr)
        return params


class Adam:
    name = "adam"

    def __init__(self, lr: float = 0.001, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.state = None

    def _ensure(self, params):
        if self.state is None:
            self.state = {
                name: {"m": np.zeros_like(arr), "v": np.zeros_like(arr),
                       "t": np.zeros(arr.shape[0], dtype=np.int64)}
                for name, arr in (("entities", params.entities), ("relations", params.relations))
            }

    def _update(self, value, st, grad, rows, lr):
        if not len(rows):
            return
        g = grad[rows]
        st["t"][rows] += 1
        t = st["t"][rows].reshape((-1,) + (1,) * (g.ndim - 1))
        m = st["m"][rows] = self.beta1 * st["m"][rows] + (1 - self.beta1) * g
        v = st["v"][rows] = self.beta2 * st["v"][rows] + (1 - self.beta2) * g * g
        m_hat = m / (1 - self.beta1 ** t)
        v_hat = v / (1 - self.beta2 ** t)
        value[rows] -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def step(self, params, grads: GradientSet, lr: float | None = None):
        lr = self.lr if lr is None else lr
        self._ensure(params)
        self._update(params.entities, self.state["entities"], grads.entities, grads.entity_rows, lr)
        self._update(params.relations, self.state["relations"], grads.relations,
                     grads.relation_rows, lr)
        return params


def make_optimizer(name: str, lr: float):
    name = name.lower()
    if name in ("adagrad", "ag"):
        return Adagrad(lr)
    if name in ("adam", "a"):
        return Adam(lr)
    raise ValueError(f"unknown optimizer {name!r}")


def optimizer_step(opt_state, params, gradients: GradientSet, lr: float | None = None):
    return opt_state.step(params, gradients, lr)
