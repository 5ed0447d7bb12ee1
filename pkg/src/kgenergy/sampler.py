"""Metropolis-Hastings sampling of triples under the energy model.

The proposal corrupts one position of the current triple: the position is
drawn uniformly from the enabled ones and the replacement uniformly from the
vocabulary minus the current value. That proposal is symmetric, so the
acceptance probability reduces to ``min(1, exp(f(new) - f(old)))`` and the
chain targets ``pi(t) ∝ exp(f(t))``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Triple

SUBJECT, PREDICATE, OBJECT = 0, 1, 2
POSITION_NAMES = {"subject": SUBJECT, "predicate": PREDICATE, "object": OBJECT,
                  "s": SUBJECT, "p": PREDICATE, "o": OBJECT}


def parse_positions(positions) -> tuple[int, ...]:
    if isinstance(positions, str):
        positions = [x for x in positions.replace(",", " ").split() if x]
    out = []
    for p in positions:
        if isinstance(p, str):
            if p.lower() not in POSITION_NAMES:
                raise ValueError(f"invalid position {p!r}")
            idx = POSITION_NAMES[p.lower()]
        else:
            idx = int(p)
        if idx not in (SUBJECT, PREDICATE, OBJECT):
            raise ValueError(f"invalid position {p!r}")
        if idx not in out:
            out.append(idx)
    if not out:
        raise ValueError("at least one proposal position must be enabled")
    return tuple(sorted(out))


@dataclass(frozen=True)
class ChainState:
    current: Triple
    origin: Triple


@dataclass(frozen=True)
class SamplerConfig:
    steps_per_chain: int = 20
    chains_per_batch_triple: int = 1
    positions: tuple = (SUBJECT, PREDICATE, OBJECT)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "positions", parse_positions(self.positions))
        if self.steps_per_chain < 1:
            raise ValueError("steps_per_chain must be >= 1")
        if self.chains_per_batch_triple < 1:
            raise ValueError("chains_per_batch_triple must be >= 1")


def _check_sizes(vocab_sizes, positions):
    n_ent, n_rel = vocab_sizes
    for pos in positions:
        size = n_rel if pos == PREDICATE else n_ent
        if size < 2:
            what = "relations" if pos == PREDICATE else "entities"
            raise ValueError(f"need at least 2 {what} to propose at position {pos}")


def propose(rng: np.random.Generator, t, vocab_sizes, positions=(SUBJECT, PREDICATE, OBJECT)):
    """Corrupt one position of ``t``; returns ``(candidate, position)``."""
    positions = parse_positions(positions)
    _check_sizes(vocab_sizes, positions)
    pos = positions[int(rng.integers(len(positions)))]
    size = vocab_sizes[1] if pos == PREDICATE else vocab_sizes[0]
    cur = list(t)
    r = int(rng.integers(size - 1))
    if r >= cur[pos]:
        r += 1
    cur[pos] = r
    return Triple(*cur), pos


def acceptance_prob(space, old, new) -> float:
    diff = float(np.diff(space.score_triples([tuple(old), tuple(new)]))[0])
    if diff >= 0:
        return 1.0
    return float(np.exp(diff))


def step(space, chain: ChainState, rng: np.random.Generator,
         positions=(SUBJECT, PREDICATE, OBJECT)) -> ChainState:
    sizes = (space.num_entities, space.num_relations)
    cand, _ = propose(rng, chain.current, sizes, positions)
    a = acceptance_prob(space, chain.current, cand)
    if rng.random() < a:
        return ChainState(cand, chain.origin)
    return chain


def run_chains(space, starts, steps: int, positions, rng: np.random.Generator,
               return_stats: bool = False):
    """Advance many independent chains in lock-step (vectorised).

    Returns the final states, and optionally the number of accepted moves.
    """
    state = np.array(starts, dtype=np.int64).reshape(-1, 3)
    positions = np.asarray(parse_positions(positions))
    n_ent, n_rel = space.num_entities, space.num_relations
    _check_sizes((n_ent, n_rel), positions)
    n = len(state)
    rows = np.arange(n)
    cur_score = space.score_triples(state)
    accepted = 0
    for _ in range(steps):
        pos = positions[rng.integers(len(positions), size=n)]
        size = np.where(pos == PREDICATE, n_rel, n_ent)
        repl = rng.integers(0, size - 1)
        repl += repl >= state[rows, pos]
        cand = state.copy()
        cand[rows, pos] = repl
        cand_score = space.score_triples(cand)
        u = rng.random(n)
        acc = u < np.exp(np.minimum(cand_score - cur_score, 0.0))
        state[acc] = cand[acc]
        cur_score[acc] = cand_score[acc]
        accepted += int(acc.sum())
    if return_stats:
        return state, accepted
    return state


def generate_samples(space, batch, cfg: SamplerConfig, rng: np.random.Generator,
                     threads: int = 1, return_stats: bool = False):
    """Run ``chains_per_batch_triple`` chains from every batch triple; collect final states.

    With ``threads > 1`` the chains are split into fixed chunks, each driven by
    its own child generator, so the result depends only on the seed and the
    thread count, not on scheduling.
    """
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    if not len(batch):
        raise ValueError("batch must be non-empty")
    starts = np.repeat(batch, cfg.chains_per_batch_triple, axis=0)
    steps = cfg.steps_per_chain
    if threads <= 1:
        out, acc = run_chains(space, starts, steps, cfg.positions, rng, return_stats=True)
    else:
        chunks = np.array_split(starts, threads)
        rngs = rng.spawn(len(chunks))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda args: run_chains(space, args[0], steps, cfg.positions, args[1], True),
                zip(chunks, rngs)))
        out = np.concatenate([r[0] for r in results])
        acc = sum(r[1] for r in results)
    if return_stats:
        return out, acc / (len(starts) * steps)
    return out


def transition_matrix(space, positions=(SUBJECT, PREDICATE, OBJECT)):
    """Exact one-step MH kernel over every triple of a small universe.

    Returns ``(states, K)`` where ``states`` is the ``(E*R*E, 3)`` array in
    lexicographic order and ``K[i, j]`` the probability of moving i -> j.
    """
    positions = parse_positions(positions)
    n_ent, n_rel = space.num_entities, space.num_relations
    _check_sizes((n_ent, n_rel), positions)
    states = np.array([(s, p, o) for s in range(n_ent) for p in range(n_rel)
                       for o in range(n_ent)], dtype=np.int64)
    index = {tuple(x): i for i, x in enumerate(states.tolist())}
    scores = space.score_triples(states)
    k = np.zeros((len(states), len(states)))
    for i, st in enumerate(states.tolist()):
        for pos in positions:
            size = n_rel if pos == PREDICATE else n_ent
            q = 1.0 / (len(positions) * (size - 1))
            for v in range(size):
                if v == st[pos]:
                    continue
                nxt = list(st)
                nxt[pos] = v
                j = index[tuple(nxt)]
                k[i, j] += q * min(1.0, float(np.exp(scores[j] - scores[i])))
        k[i, i] = 1.0 - k[i].sum()
    return states, k
