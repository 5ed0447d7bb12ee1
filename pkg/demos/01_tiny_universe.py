#! /usr/bin/env python3
"""A knowledge graph small enough to enumerate.

Two entities and two relations give 8 possible triples and 256 possible
graphs. We check that the closed-form log partition function matches brute
force, then let the Metropolis-Hastings sampler loose and compare its
long-run triple frequencies with exp(f) normalised over the 8 triples.
"""
import numpy as np

from kgenergy.model import Kind, enumerate_graphs, graph_energy, init, log_partition_closed
from kgenergy.sampler import run_chains


def main():
    space = init(2, 2, 3, Kind.FULL, sigma=1.0, seed=0)

    # every graph's unnormalised weight exp(-E(X))
    neg_e = np.array([-graph_energy(space, x) for x in enumerate_graphs(2, 2)])
    brute = neg_e.max() + np.log(np.exp(neg_e - neg_e.max()).sum())
    print(f"log Z closed form  {log_partition_closed(space):.12f}")
    print(f"log Z enumeration  {brute:.12f}  ({len(neg_e)} graphs)")

    # sampler: 20k chains of 50 steps, all started at the same triple
    rng = np.random.default_rng(1)
    out = run_chains(space, np.zeros((20_000, 3), dtype=np.int64), 50, "s,p,o", rng)
    table = space.score_table()
    target = np.exp(table - table.max())
    target /= target.sum()
    freq = np.zeros_like(target)
    np.add.at(freq, (out[:, 0], out[:, 1], out[:, 2]), 1)
    freq /= len(out)
    print("\n triple     target  sampled")
    for s, p, o in np.ndindex(*target.shape):
        print(f" ({s},{p},{o})   {target[s, p, o]:.4f}   {freq[s, p, o]:.4f}")
    print(f"total variation {0.5 * np.abs(freq - target).sum():.4f}")


if __name__ == "__main__":
    main()
