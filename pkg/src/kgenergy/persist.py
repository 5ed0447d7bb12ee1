"""Embedding files.

Binary container (all little-endian)::

    offset  size  field
    0       4     magic b"KGEB"
    4       4     format version (u32, currently 1)
    8       1     kind tag (u8): 0 full bilinear, 1 diagonal, 2 translational
    9       8     |E| (u64)
    17      8     |R| (u64)
    25      8     N   (u64)
    33      ...   float64 entity matrix (E, N) row-major, then relations
                  row-major: (R, N, N) full, (R, N) diagonal or translational

The binary file carries numbers only. A JSON sidecar ``<path>.meta.json``
stores the model kind name (``enm``, ``rese`` ... which the tag cannot tell
apart) and the vocabulary, so scoring commands can decode names.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .core import Vocabulary
from .errors import KGError
from .model import EmbeddingSpace, Kind, TransEParams

MAGIC = b"KGEB"
VERSION = 1
HEADER = struct.Struct("<4sIBQQQ")
TAG_FULL, TAG_DIAGONAL, TAG_TRANSE = 0, 1, 2


class FormatError(KGError, ValueError):
    pass


def kind_tag(params) -> int:
    if isinstance(params, TransEParams):
        return TAG_TRANSE
    return TAG_DIAGONAL if params.kind is Kind.DIAGONAL else TAG_FULL


def _atomic_write(path, data: bytes) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_bytes(params) -> bytes:
    ent = np.ascontiguousarray(params.entities, dtype="<f8")
    rel = np.ascontiguousarray(params.relations, dtype="<f8")
    head = HEADER.pack(MAGIC, VERSION, kind_tag(params), ent.shape[0], rel.shape[0], ent.shape[1])
    return head + ent.tobytes() + rel.tobytes()


def from_bytes(buf: bytes):
    if len(buf) < HEADER.size:
        raise FormatError("embedding file too short for header")
    magic, version, tag, n_e, n_r, dim = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")
    if tag not in (TAG_FULL, TAG_DIAGONAL, TAG_TRANSE):
        raise FormatError(f"unknown kind tag {tag}")
    rel_shape = (n_r, dim, dim) if tag == TAG_FULL else (n_r, dim)
    n_vals = n_e * dim + int(np.prod(rel_shape))
    body = buf[HEADER.size:]
    if len(body) != 8 * n_vals:
        raise FormatError(f"expected {8 * n_vals} payload bytes, found {len(body)}")
    vals = np.frombuffer(body, dtype="<f8").astype(float)
    ent = vals[:n_e * dim].reshape(n_e, dim)
    rel = vals[n_e * dim:].reshape(rel_shape)
    if tag == TAG_TRANSE:
        return TransEParams(ent, rel)
    return EmbeddingSpace(ent, rel, Kind.DIAGONAL if tag == TAG_DIAGONAL else Kind.FULL)


def save_embeddings(path, params, model_kind: str | None = None, vocab: Vocabulary | None = None) -> None:
    """Write the binary file and, if ``model_kind`` or ``vocab`` is given, its sidecar."""
    _atomic_write(path, to_bytes(params))
    if model_kind is not None or vocab is not None:
        meta = {"model_kind": model_kind}
        if vocab is not None:
            meta["entities"] = list(vocab.entity_names)
            meta["relations"] = list(vocab.relation_names)
        _atomic_write(meta_path(path), json.dumps(meta, indent=1).encode("utf-8"))


def load_embeddings(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def meta_path(path) -> str:
    return os.fspath(path) + ".meta.json"


def load_meta(path) -> dict:
    """Sidecar contents as ``{"model_kind", "vocab"}`` (values may be None)."""
    mp = meta_path(path)
    if not os.path.exists(mp):
        return {"model_kind": None, "vocab": None}
    with open(mp, encoding="utf-8") as fh:
        meta = json.load(fh)
    vocab = None
    if "entities" in meta:
        vocab = Vocabulary(tuple(meta["entities"]), tuple(meta["relations"]))
    return {"model_kind": meta.get("model_kind"), "vocab": vocab}


def export_tsv(path, params, vocab: Vocabulary | None = None) -> None:
    """Text export: one line per entity then per relation, ``name<TAB>values...``.

    Relation matrices are flattened row-major. Names default to ``e<i>``/``r<i>``.
    """
    ents = vocab.entity_names if vocab is not None else [f"e{i}" for i in range(params.num_entities)]
    rels = vocab.relation_names if vocab is not None else [f"r{i}" for i in range(params.num_relations)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for name, row in zip(ents, params.entities):
            fh.write(name + "\t" + "\t".join(repr(float(x)) for x in row) + "\n")
        for name, mat in zip(rels, params.relations):
            fh.write(name + "\t" + "\t".join(repr(float(x)) for x in np.ravel(mat)) + "\n")
