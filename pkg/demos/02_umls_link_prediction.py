#! /usr/bin/env python3
"""Link prediction on the UMLS benchmark.

Trains the full bilinear energy model (N=64) with sampled negative phases,
printing the filtered validation MRR after every epoch, then reports test
MRR and hits@k. Pass a model kind (enm, rese, rekl) as the first argument
to compare against the discriminative baselines.
"""
import sys
import time
from pathlib import Path

from kgenergy.core import build_vocabulary, encode, load_dataset_dir
from kgenergy.evaluation import FilterSet, evaluate
from kgenergy.trainer import fit, preset

DATA = Path(__file__).resolve().parents[1] / "data" / "umls"


def main(kind="enm", epochs=20):
    d = load_dataset_dir(DATA)
    vocab = build_vocabulary(d["train"] + d["valid"] + d["test"])
    train, valid, test = (encode(vocab, d[k]) for k in ("train", "valid", "test"))
    print(f"{vocab.num_entities} entities, {vocab.num_relations} relations, "
          f"{len(train)}/{len(valid)}/{len(test)} triples")
    filt = FilterSet(train, valid, test)

    def on_epoch(epoch, params, stats):
        m = evaluate(params, valid, filt)
        extra = " ".join(f"{k}={v:.3f}" for k, v in stats.items())
        print(f"epoch {epoch:3d}  valid mrr {m['mrr']:.3f}  {extra}", flush=True)
        return {"valid_mrr": m["mrr"]}

    cfg = preset(kind, "umls", epochs=epochs)
    t0 = time.perf_counter()
    result = fit(cfg, train, vocab.num_entities, vocab.num_relations, on_epoch)
    m = evaluate(result.params, test, filt)
    print(f"\n{kind} test: " + "  ".join(f"{k} {v:.3f}" for k, v in m.items())
          + f"  ({time.perf_counter() - t0:.0f}s)")


if __name__ == "__main__":
    main(*(sys.argv[1:2] or ["enm"]))
