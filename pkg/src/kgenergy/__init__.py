"""Energy-based knowledge graph embeddings.

Bilinear and translational embeddings of (subject, predicate, object) triples,
trained either discriminatively (squared error, softmax KL, soft-margin) or as
an energy-based graph model whose gradient contrasts data triples with
Metropolis-Hastings samples. The trained models grade novel triples by
suspiciousness for security monitoring.
"""
from .core import (LabeledEvent, SeverityClass, Triple, TripleStore, Vocabulary, build_vocabulary,
                   decode, encode, iterate_batches, load_dataset_dir, read_labeled_events,
                   read_triples, split)
from .errors import ConfigError, KGError, NumericError, ParseError, UnknownSymbolError
from .model import EmbeddingSpace, Kind, TransEParams, init, init_transe, prob, score
from .trainer import TrainConfig, fit, preset

__all__ = [
    "ConfigError", "EmbeddingSpace", "KGError", "Kind", "LabeledEvent", "NumericError",
    "ParseError", "SeverityClass", "TrainConfig", "TransEParams", "Triple", "TripleStore",
    "UnknownSymbolError", "Vocabulary", "build_vocabulary", "decode", "encode", "fit", "init",
    "init_transe", "iterate_batches", "load_dataset_dir", "preset", "prob", "read_labeled_events",
    "read_triples", "score", "split",
]
