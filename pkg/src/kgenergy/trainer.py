"""Training: wake-sleep for the energy model, supervised losses for the baselines.

Sign convention: every function named ``*_loss_and_grad`` returns the gradient
of a loss to be *minimised*. The energy model maximises log-likelihood, so
its wake-sleep direction is negated before regularisation and the optimizer
step (``train_energy_epoch``).
"""
from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import sampler as smp
from .core import TripleStore, iterate_batches
from .model import EmbeddingSpace, Kind, TransEParams, init, init_transe, sigmoid, softplus
from .optim import GradientSet, make_optimizer

MODEL_KINDS = ("enm", "enmd", "rese", "rekl", "transe")
ENERGY_KINDS = ("enm", "enmd")


@dataclass
class TrainConfig:
    model_kind: str = "enmd"
    dim: int = 20
    learning_rate: float = 0.02
    epochs: int = 50
    batch_size: int = 100
    neg_subject_count: int = 0
    neg_object_count: int = 0
    free_samples: int = 20
    chains_per_triple: int = 1
    sampler_positions: str = "subject,predicate,object"
    l1_weight: float = 1e-4
    l2_weight: float = 0.0
    optimizer: str = "adagrad"
    init_mu: float = 0.0
    init_sigma: float = 0.1
    margin: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.model_kind = self.model_kind.lower()
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}")
        for name in ("learning_rate", "l1_weight", "l2_weight", "init_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("epochs", "neg_subject_count", "neg_object_count"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.dim < 1 or self.batch_size < 1:
            raise ValueError("dim and batch_size must be >= 1")
        make_optimizer(self.optimizer, self.learning_rate)
        if self.model_kind in ENERGY_KINDS:
            self.sampler  # validates sampler keys

    @property
    def sampler(self) -> smp.SamplerConfig:
        return smp.SamplerConfig(self.free_samples, self.chains_per_triple,
                                 self.sampler_positions, self.seed)

    @property
    def kind(self) -> Kind:
        return Kind.DIAGONAL if self.model_kind == "enmd" else Kind.FULL

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# Table of simulation parameters; "metrics" = link-prediction experiment,
# "anomaly" = severity experiment, "umls" = UMLS comparison.
PRESETS = {
    ("metrics", "rese"): dict(dim=12, learning_rate=0.1, batch_size=100, neg_subject_count=2,
                              neg_object_count=2, l1_weight=0.0, l2_weight=5e-5, optimizer="adagrad"),
    ("metrics", "rekl"): dict(dim=12, learning_rate=0.02, batch_size=100, neg_subject_count=3,
                              neg_object_count=3, l1_weight=0.0, l2_weight=1e-4, optimizer="adagrad"),
    ("metrics", "enm"): dict(dim=20, learning_rate=0.05, batch_size=200, free_samples=20,
                             l1_weight=1e-4, l2_weight=0.0, optimizer="adagrad"),
    ("metrics", "enmd"): dict(dim=20, learning_rate=0.02, batch_size=100, free_samples=20,
                              l1_weight=1e-4, l2_weight=0.0, optimizer="adagrad"),
    ("anomaly", "rese"): dict(dim=20, learning_rate=0.01, batch_size=100, neg_subject_count=2,
                              neg_object_count=2, l1_weight=0.0, l2_weight=1e-6, optimizer="adam"),
    ("anomaly", "rekl"): dict(dim=8, learning_rate=0.02, batch_size=100, neg_subject_count=3,
                              neg_object_count=3, l1_weight=0.0, l2_weight=1e-6, optimizer="adam"),
    ("anomaly", "enmd"): dict(dim=20, learning_rate=0.02, batch_size=100, free_samples=20,
                              l1_weight=0.0, l2_weight=1e-3, optimizer="adagrad"),
    ("anomaly", "transe"): dict(dim=8, learning_rate=0.1, batch_size=100, neg_subject_count=3,
                                neg_object_count=3, l1_weight=0.0, l2_weight=1e-5,
                                optimizer="adam", init_sigma=1.0),
}
PRESETS[("umls", "enm")] = dict(PRESETS[("metrics", "enm")], dim=64)
PRESETS[("umls", "rese")] = dict(PRESETS[("metrics", "rese")], dim=64, learning_rate=1e-3,
                                 l2_weight=1e-4, optimizer="adam")
PRESETS[("umls", "rekl")] = dict(PRESETS[("metrics", "rekl")], dim=64, learning_rate=1e-3,
                                 l2_weight=1e-4, neg_subject_count=2, neg_object_count=2,
                                 optimizer="adam")


def preset(model_kind: str, experiment: str = "metrics", **overrides) -> TrainConfig:
    model_kind = model_kind.lower()
    try:
        base = PRESETS[(experiment, model_kind)]
    except KeyError:
        raise ValueError(f"no preset for {model_kind!r} in experiment {experiment!r}") from None
    return TrainConfig(model_kind=model_kind, **{**base, **overrides})


# -- negative samples ------------------------------------------------------

def corrupt_batch(rng: np.random.Generator, batch, k_subj: int, k_obj: int, num_entities: int):
    """Subject/object corruptions of every batch triple.

    Returns ``(negatives, owner)`` where ``owner[i]`` indexes the batch triple
    negative ``i`` was derived from. Replacements are uniform over all
    entities except the original one.
    """
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    k = k_subj + k_obj
    if k == 0 or not len(batch):
        return np.zeros((0, 3), dtype=np.int64), np.zeros(0, dtype=np.int64)
    if num_entities < 2:
        raise ValueError("need at least 2 entities for negative sampling")
    owner = np.repeat(np.arange(len(batch)), k)
    neg = batch[owner].copy()
    col = np.tile(np.r_[np.zeros(k_subj, dtype=np.int64), np.full(k_obj, 2, dtype=np.int64)],
                  len(batch))
    rows = np.arange(len(neg))
    repl = rng.integers(0, num_entities - 1, size=len(neg))
    repl += repl >= neg[rows, col]
    neg[rows, col] = repl
    return neg, owner


def negative_samples(rng: np.random.Generator, t, k_subj: int, k_obj: int, num_entities: int):
    neg, _ = corrupt_batch(rng, [tuple(t)], k_subj, k_obj, num_entities)
    return neg


# -- bilinear gradients ----------------------------------------------------

def scatter_rows(index, values, num_rows: int) -> np.ndarray:
    """``out[index[i]] += values[i]`` via a sparse product (faster than ``np.add.at``)."""
    values = np.asarray(values, dtype=float)
    n = len(index)
    sel = sparse.csr_matrix((np.ones(n), (index, np.arange(n))), shape=(num_rows, n))
    flat = sel @ values.reshape(n, -1)
    return np.asarray(flat).reshape((num_rows,) + values.shape[1:])


def bilinear_backprop(space: EmbeddingSpace, triples, coef) -> GradientSet:
    """Accumulate ``sum_i coef_i * d f(t_i) / d theta`` over triples."""
    t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    coef = np.broadcast_to(np.asarray(coef, dtype=float), (len(t),))
    if not len(t):
        return GradientSet.zeros_like(space)
    s, p, o = t[:, 0], t[:, 1], t[:, 2]
    es, eo = space.entities[s], space.entities[o]
    c = coef[:, None]
    if space.kind is Kind.DIAGONAL:
        rel_terms = c * es * eo
    else:
        rel_terms = coef[:, None, None] * es[:, :, None] * eo[:, None, :]
    ent_terms = np.concatenate([c * space.right(p, o), c * space.left(s, p)])
    return GradientSet(scatter_rows(np.r_[s, o], ent_terms, space.num_entities),
                       scatter_rows(p, rel_terms, space.num_relations),
                       np.unique(np.r_[s, o]), np.unique(p))


def wake_sleep_gradients(space: EmbeddingSpace, data, samples) -> GradientSet:
    """Log-likelihood ascent direction: data-phase mean minus model-phase mean.

    Each phase averages over its own set (``1/|B|`` and ``1/|S|``); an empty
    sample set contributes zero.
    """
    data = np.asarray(data, dtype=np.int64).reshape(-1, 3)
    samples = np.asarray(samples, dtype=np.int64).reshape(-1, 3)
    if not len(data):
        raise ValueError("data batch must be non-empty")
    coef = np.r_[np.full(len(data), 1.0 / len(data)),
                 np.full(len(samples), -1.0 / len(samples)) if len(samples) else np.zeros(0)]
    return bilinear_backprop(space, np.concatenate([data, samples]), coef)


def exact_loglik_gradients(space: EmbeddingSpace, data) -> GradientSet:
    """Gradient of ``log p(X_data)``: data sum minus the sigma(f)-weighted sum over all slots.

    This is the wake-sleep rule with the sampled phase replaced by its exact
    expectation; only feasible for small universes.
    """
    data = np.unique(np.asarray(data, dtype=np.int64).reshape(-1, 3), axis=0)
    n_e, n_r = space.num_entities, space.num_relations
    universe = np.array([(s, p, o) for s in range(n_e) for p in range(n_r) for o in range(n_e)],
                        dtype=np.int64)
    weights = sigmoid(space.score_triples(universe))
    triples = np.concatenate([data, universe])
    coef = np.r_[np.ones(len(data)), -np.atleast_1d(weights)]
    return bilinear_backprop(space, triples, coef)


def eta_gated_update(space: EmbeddingSpace, t, eta: int, s_p: int) -> GradientSet:
    """Per-triple update gated by the global phase factor ``eta`` and teaching spike ``s_p``.

    ``eta = +1`` data phase, ``-1`` model phase, ``0`` free-running (no learning).
    """
    if eta not in (-1, 0, 1) or s_p not in (0, 1):
        raise ValueError("eta must be in {-1, 0, 1} and s_p in {0, 1}")
    return bilinear_backprop(space, [tuple(t)], float(eta * s_p))


# -- baseline losses -------------------------------------------------------

def se_loss_and_grad(space: EmbeddingSpace, triples, targets):
    """Squared reconstruction error ``sum (y - f)^2`` and its gradient."""
    f = space.score_triples(triples)
    r = f - np.asarray(targets, dtype=float)
    return float(np.sum(r * r)), bilinear_backprop(space, triples, 2.0 * r)


def kl_loss_and_grad(space: EmbeddingSpace, positives, negatives):
    """KL divergence between the uniform distribution on positives and a batch softmax.

    The softmax normaliser runs only over the batch positives and their
    negatives, approximating the full softmax over every possible triple.
    """
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    negatives = np.asarray(negatives, dtype=np.int64).reshape(-1, 3)
    triples = np.concatenate([positives, negatives])
    theta = space.score_triples(triples)
    m = theta.max()
    log_z = m + np.log(np.sum(np.exp(theta - m)))
    soft = np.exp(theta - log_z)
    n_pos = len(positives)
    q = np.r_[np.full(n_pos, 1.0 / n_pos), np.zeros(len(negatives))]
    loss = float(-np.log(n_pos) - np.sum(q * (theta - log_z)))
    return loss, bilinear_backprop(space, triples, soft - q)


def transe_loss_and_grad(params: TransEParams, positives, negatives, owner, margin: float = 1.0):
    """Mean soft-margin loss ``softplus(margin + d_pos - d_neg)`` over positive/negative pairs."""
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    negatives = np.asarray(negatives, dtype=np.int64).reshape(-1, 3)
    g = GradientSet.zeros_like(params)
    if not len(negatives):
        return 0.0, g
    owner = np.asarray(owner, dtype=np.int64)
    pairs_pos = positives[owner]

    def diff(t):
        return params.entities[t[:, 0]] + params.relations[t[:, 1]] - params.entities[t[:, 2]]

    dp, dn = diff(pairs_pos), diff(negatives)
    np_, nn_ = np.linalg.norm(dp, axis=1), np.linalg.norm(dn, axis=1)
    x = margin + np_ - nn_
    n = len(negatives)
    loss = float(np.mean(softplus(x)))
    w = sigmoid(x) / n
    # d||d||/dd = d/||d||, taken as 0 at the origin
    up = np.divide(dp, np_[:, None], out=np.zeros_like(dp), where=np_[:, None] > 0) * w[:, None]
    un = np.divide(dn, nn_[:, None], out=np.zeros_like(dn), where=nn_[:, None] > 0) * w[:, None]
    allt = np.concatenate([pairs_pos, negatives])
    u = np.concatenate([up, -un])
    g.entities = scatter_rows(np.r_[allt[:, 0], allt[:, 2]], np.concatenate([u, -u]),
                              params.num_entities)
    g.relations = scatter_rows(allt[:, 1], u, params.num_relations)
    g.entity_rows = np.unique(np.r_[allt[:, 0], allt[:, 2]])
    g.relation_rows = np.unique(allt[:, 1])
    return loss, g


def apply_regularization(grads: GradientSet, params, l1_weight: float = 0.0,
                         l2_weight: float = 0.0) -> GradientSet:
    """Add ``l2 * 2 theta + l1 * sign(theta)`` to the touched rows of a loss gradient."""
    if l1_weight < 0 or l2_weight < 0:
        raise ValueError("regularisation weights must be >= 0")
    if l1_weight == 0 and l2_weight == 0:
        return grads
    for buf, value, rows in ((grads.entities, params.entities, grads.entity_rows),
                             (grads.relations, params.relations, grads.relation_rows)):
        th = value[rows]
        buf[rows] += l2_weight * 2.0 * th + l1_weight * np.sign(th)
    return grads


def regularization_penalty(params, rows_e, rows_r, l1_weight=0.0, l2_weight=0.0) -> float:
    th = np.concatenate([params.entities[rows_e].ravel(), params.relations[rows_r].ravel()])
    return float(l2_weight * np.sum(th * th) + l1_weight * np.sum(np.abs(th)))


# -- epochs ----------------------------------------------------------------

@dataclass
class Streams:
    """Independent random sub-streams derived from one seed."""

    init: np.random.Generator
    batching: np.random.Generator
    sampler: np.random.Generator
    negatives: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "Streams":
        return cls(*(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)))


def _train_store(train):
    return train.triples if isinstance(train, TripleStore) else np.asarray(train).reshape(-1, 3)


def train_energy_epoch(space: EmbeddingSpace, train, cfg: TrainConfig, opt_state,
                       rng: Streams, threads: int = 1):
    if cfg.model_kind not in ENERGY_KINDS:
        raise ValueError("train_energy_epoch needs model_kind enm or enmd")
    scfg = cfg.sampler
    scores, acc_rates = [], []
    for batch in iterate_batches(_train_store(train), cfg.batch_size, rng.batching):
        samples, acc = smp.generate_samples(space, batch, scfg, rng.sampler, threads=threads,
                                            return_stats=True)
        scores.append(float(np.mean(space.score_triples(batch))))
        acc_rates.append(acc)
        grads = wake_sleep_gradients(space, batch, samples).negated()
        apply_regularization(grads, space, cfg.l1_weight, cfg.l2_weight)
        opt_state.step(space, grads, cfg.learning_rate)
    return space, {"mean_score": float(np.mean(scores)), "acceptance_rate": float(np.mean(acc_rates))}


def train_rese_epoch(space: EmbeddingSpace, train, cfg: TrainConfig, opt_state, rng: Streams):
    if cfg.model_kind != "rese":
        raise ValueError("train_rese_epoch needs model_kind rese")
    losses = []
    for batch in iterate_batches(_train_store(train), cfg.batch_size, rng.batching):
        neg, _ = corrupt_batch(rng.negatives, batch, cfg.neg_subject_count, cfg.neg_object_count,
                               space.num_entities)
        triples = np.concatenate([batch, neg])
        targets = np.r_[np.ones(len(batch)), np.zeros(len(neg))]
        loss, grads = se_loss_and_grad(space, triples, targets)
        losses.append(loss / len(triples))
        apply_regularization(grads, space, cfg.l1_weight, cfg.l2_weight)
        opt_state.step(space, grads, cfg.learning_rate)
    return space, {"loss": float(np.mean(losses))}


def train_rekl_epoch(space: EmbeddingSpace, train, cfg: TrainConfig, opt_state, rng: Streams):
    if cfg.model_kind != "rekl":
        raise ValueError("train_rekl_epoch needs model_kind rekl")
    losses = []
    for batch in iterate_batches(_train_store(train), cfg.batch_size, rng.batching):
        neg, _ = corrupt_batch(rng.negatives, batch, cfg.neg_subject_count, cfg.neg_object_count,
                               space.num_entities)
        loss, grads = kl_loss_and_grad(space, batch, neg)
        losses.append(loss)
        apply_regularization(grads, space, cfg.l1_weight, cfg.l2_weight)
        opt_state.step(space, grads, cfg.learning_rate)
    return space, {"loss": float(np.mean(losses))}


def train_transe_epoch(params: TransEParams, train, cfg: TrainConfig, opt_state, rng: Streams):
    if cfg.model_kind != "transe":
        raise ValueError("train_transe_epoch needs model_kind transe")
    losses = []
    for batch in iterate_batches(_train_store(train), cfg.batch_size, rng.batching):
        neg, owner = corrupt_batch(rng.negatives, batch, cfg.neg_subject_count,
                                   cfg.neg_object_count, params.num_entities)
        loss, grads = transe_loss_and_grad(params, batch, neg, owner, cfg.margin)
        losses.append(loss)
        apply_regularization(grads, params, cfg.l1_weight, cfg.l2_weight)
        opt_state.step(params, grads, cfg.learning_rate)
    return params, {"loss": float(np.mean(losses))}


EPOCH_FUNCTIONS = {
    "enm": train_energy_epoch,
    "enmd": train_energy_epoch,
    "rese": train_rese_epoch,
    "rekl": train_rekl_epoch,
    "transe": train_transe_epoch,
}


def init_params(cfg: TrainConfig, num_entities: int, num_relations: int, rng):
    if cfg.model_kind == "transe":
        return init_transe(num_entities, num_relations, cfg.dim, cfg.init_mu, cfg.init_sigma, rng)
    return init(num_entities, num_relations, cfg.dim, cfg.kind, cfg.init_mu, cfg.init_sigma, rng)


@dataclass
class TrainResult:
    params: object
    history: list = field(default_factory=list)
    seconds: float = 0.0


def fit(cfg: TrainConfig, train, num_entities: int, num_relations: int,
        callback=None, threads: int = 1) -> TrainResult:
    """Train ``cfg.epochs`` epochs from a fresh initialisation.

    ``callback(epoch, params, stats)`` may return a dict of extra metrics that
    is merged into the epoch's history record.
    """
    from .errors import NumericError

    streams = Streams.from_seed(cfg.seed)
    params = init_params(cfg, num_entities, num_relations, streams.init)
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate)
    epoch_fn = EPOCH_FUNCTIONS[cfg.model_kind]
    history = []
    t0 = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        if cfg.model_kind in ENERGY_KINDS:
            params, stats = epoch_fn(params, train, cfg, opt, streams, threads=threads)
        else:
            params, stats = epoch_fn(params, train, cfg, opt, streams)
        if not params.is_finite():
            raise NumericError(f"non-finite parameters after epoch {epoch}")
        record = {"epoch": epoch, **stats}
        if callback is not None:
            record.update(callback(epoch, params, stats) or {})
        history.append(record)
    return TrainResult(params, history, time.perf_counter() - t0)
