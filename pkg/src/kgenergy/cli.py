"""Command-line interface: ``kgenergy {train,eval,score,rank,sample,synth}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(unreadable/malformed files, unknown symbols, model/data mismatch),
3 numeric failure (non-finite parameters).

``KGENERGY_DATA_DIR`` names the default dataset directory; ``train.txt``,
``valid.txt`` and ``test.txt`` inside it are used when no file is given.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import persist
from .anomaly import (TrainedModel, rank_alerts, score_events,
                      severity_ordering_accuracy, write_alert_report)
from .core import (LabeledEvent, SeverityClass, TripleStore, _iter_records, build_vocabulary,
                   decode, encode, read_labeled_events, read_triples, write_labeled_events, write_triples)
from .errors import ConfigError, KGError, NumericError, ParseError, UnknownSymbolError
from .evaluation import DEFAULT_KS, FilterSet, evaluate, score_distributions, write_metrics_report
from .sampler import parse_positions, run_chains
from .synth import SynthConfig, synth_industrial_graph
from .trainer import PRESETS, TrainConfig, corrupt_batch, fit

DATA_DIR_ENV = "KGENERGY_DATA_DIR"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

# extra spellings accepted next to the --key-name form of every TrainConfig key
FLAG_ALIASES = {
    "model_kind": ["--model"],
    "learning_rate": ["--lr"],
    "batch_size": ["--batch"],
    "l1_weight": ["--l1"],
    "l2_weight": ["--l2"],
}


class UsageError(KGError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- config ----------------------------------------------------------------

def _field_types(cls):
    return {f.name: type(f.default) for f in dataclasses.fields(cls)}


def _coerce(cls, key, value):
    typ = _field_types(cls)[key]
    try:
        if typ is bool:
            return value.lower() in ("1", "true", "yes")
        return typ(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def read_config_file(path) -> dict:
    """``key = value`` lines with TrainConfig keys; ``#`` comments and blank lines allowed."""
    out = {}
    known = set(TrainConfig.keys())
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (x.strip() for x in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = _coerce(TrainConfig, key, value)
    return out


def build_config(args) -> TrainConfig:
    """Defaults < preset < config file < flags."""
    values = {}
    kind = getattr(args, "model_kind", None)
    file_values = read_config_file(args.config) if args.config else {}
    kind = kind or file_values.get("model_kind")
    if args.preset:
        if kind is None:
            raise ConfigError("--preset needs a model kind (flag or config file)")
        key = (args.preset, kind.lower())
        if key not in PRESETS:
            raise ConfigError(f"no preset {args.preset!r} for model {kind!r}")
        values.update(PRESETS[key])
    values.update(file_values)
    for key in TrainConfig.keys():
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    try:
        return TrainConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# -- helpers ---------------------------------------------------------------

def _data_path(explicit, args, name):
    if explicit:
        return Path(explicit)
    base = args.data_dir or os.environ.get(DATA_DIR_ENV)
    if base and (Path(base) / f"{name}.txt").exists():
        return Path(base) / f"{name}.txt"
    return None


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json_atomic(path, payload) -> None:
    persist._atomic_write(path, json.dumps(payload, indent=2, sort_keys=True).encode("utf-8"))


def _load_model(path, model_kind=None):
    params = persist.load_embeddings(path)
    meta = persist.load_meta(path)
    kind = model_kind or meta["model_kind"]
    if kind is None:
        kind = {persist.TAG_FULL: "enm", persist.TAG_DIAGONAL: "enmd",
                persist.TAG_TRANSE: "transe"}[persist.kind_tag(params)]
    vocab = meta["vocab"]
    if vocab is None:
        raise ParseError(f"{persist.meta_path(path)} missing: vocabulary unknown")
    if (vocab.num_entities, vocab.num_relations) != (params.num_entities, params.num_relations):
        raise ParseError("model and vocabulary sizes disagree")
    return TrainedModel(kind, params, vocab)


def _encode_file(vocab, path, skip_unknown=False):
    """Encode a triple file, reporting unknown symbols with line numbers."""
    with open(path, encoding="utf-8", newline="") as fh:
        records = list(_iter_records(fh, 3, str(path)))
    rows, unknown = [], []
    for lineno, (s, p, o) in records:
        try:
            rows.append(vocab.encode_triple(s, p, o))
        except UnknownSymbolError as exc:
            unknown.append(UnknownSymbolError(exc.symbol, exc.kind, lineno))
    _report_unknown(unknown, path, skip_unknown)
    return TripleStore(rows, vocab.num_entities, vocab.num_relations)


def _report_unknown(unknown, path, skip_unknown):
    if not unknown:
        return
    for err in unknown:
        print(f"{path}: {err}", file=sys.stderr)
    if not skip_unknown:
        raise UnknownSymbolError(unknown[0].symbol, unknown[0].kind, unknown[0].line)


# -- train -----------------------------------------------------------------

def cmd_train(args) -> int:
    replay = None
    if args.replay:
        with open(args.replay, encoding="utf-8") as fh:
            replay = json.load(fh)
        cfg = TrainConfig(**replay["config"])
        train_path = Path(replay["datasets"]["train"]["path"])
        valid_path = Path(replay["datasets"]["valid"]["path"]) if "valid" in replay["datasets"] else None
    else:
        cfg = build_config(args)
        train_path = _data_path(args.train, args, "train")
        valid_path = _data_path(args.valid, args, "valid")
    if train_path is None:
        raise UsageError("no training file: pass --train or --data-dir (or set KGENERGY_DATA_DIR)")

    train_raw = read_triples(train_path)
    valid_raw = read_triples(valid_path) if valid_path else []
    if not train_raw:
        raise ParseError("training file has no triples", source=str(train_path))
    vocab = build_vocabulary(train_raw + valid_raw)
    train = encode(vocab, train_raw)
    valid = encode(vocab, valid_raw) if valid_raw else None
    filt = FilterSet(train, valid) if valid is not None else None

    def on_epoch(epoch, params, stats):
        if valid is None:
            return {}
        m = evaluate(params, valid, filt, threads=args.threads)
        if not args.quiet:
            print(f"epoch {epoch}\tvalid_mrr {m['mrr']:.4f}", flush=True)
        return {"valid_" + k: v for k, v in m.items()}

    result = fit(cfg, train, vocab.num_entities, vocab.num_relations, on_epoch, threads=args.threads)
    out = Path(args.out)
    persist.save_embeddings(out, result.params, cfg.model_kind, vocab)
    if args.export_tsv:
        persist.export_tsv(args.export_tsv, result.params, vocab)

    datasets = {"train": {"path": str(train_path.resolve()), "sha256": sha256_file(train_path)}}
    if valid_path:
        datasets["valid"] = {"path": str(valid_path.resolve()), "sha256": sha256_file(valid_path)}
    if replay is not None and replay["datasets"] != datasets:
        print("warning: dataset checksums differ from the replayed manifest", file=sys.stderr)
    manifest = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "threads": args.threads,
        "datasets": datasets,
        "model_file": str(out.resolve()),
        "model_sha256": sha256_file(out),
        "series": result.history,
        "metrics": {k: v for k, v in (result.history[-1] if result.history else {}).items()
                    if k.startswith("valid_")},
        "wall_clock_seconds": result.seconds,
    }
    write_json_atomic(args.manifest or str(out) + ".manifest.json", manifest)
    if not args.quiet:
        print(f"wrote {out} ({cfg.epochs} epochs, {result.seconds:.1f}s)")
    return EXIT_OK


# -- eval ------------------------------------------------------------------

def cmd_eval(args) -> int:
    model = _load_model(args.model_file, args.model_kind)
    test_path = _data_path(args.test, args, "test")
    if test_path is None:
        raise UsageError("no test file: pass --test or --data-dir")
    test = _encode_file(model.vocab, test_path)
    if not len(test):
        raise ParseError("test file has no triples", source=str(test_path))
    filter_paths = [Path(p) for p in args.filter]
    if not filter_paths:
        filter_paths = [p for p in (_data_path(None, args, n) for n in ("train", "valid")) if p]
    filt = FilterSet(test, *(_encode_file(model.vocab, p) for p in filter_paths))
    ks = tuple(args.k) if args.k else DEFAULT_KS
    metrics = evaluate(model.params, test, filt, ks=ks, threads=args.threads)

    rng = np.random.default_rng(args.seed)
    neg, _ = corrupt_batch(rng, test.triples, 1, 1, model.num_entities)
    neg = np.array([t for t in neg.tolist() if tuple(t) not in filt.triples], dtype=np.int64)
    dist = score_distributions(model.params, test.triples, neg.reshape(-1, 3)) if len(neg) else None
    for key, value in metrics.items():
        print(f"{key}\t{value:.6f}")
    if args.report:
        write_metrics_report(args.report, metrics, distributions=dist)
    return EXIT_OK


# -- score / rank ----------------------------------------------------------

def _read_events(path):
    """Labeled 4-column or plain 3-column file; returns name records ``((s,p,o), label|None, line)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    if lines and len(lines[0].rstrip("\r\n").split("\t")) == 4:
        return read_labeled_events(path), True
    with open(path, encoding="utf-8", newline="") as fh:
        return [(tuple(f), None, n) for n, f in _iter_records(fh, 3, str(path))], False


def _entity_filename(out: Path, name: str) -> Path:
    safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in name)
    return out.with_name(f"{out.stem}.{safe}{out.suffix}")


def cmd_score(args) -> int:
    model = _load_model(args.model_file, args.model_kind)
    raw, labeled = _read_events(args.events)
    events, unknown = [], []
    for rec in raw:
        try:
            t = model.vocab.encode_triple(*rec[0])
        except UnknownSymbolError as exc:
            unknown.append(UnknownSymbolError(exc.symbol, exc.kind, rec[2]))
            continue
        events.append(LabeledEvent(t, rec[1]) if labeled else LabeledEvent(t, SeverityClass.OBSERVED))
    _report_unknown(unknown, args.events, args.skip_unknown)
    scored = score_events(model, events)
    if not labeled:
        scored = [dataclasses.replace(s, label=None) for s in scored]
    out = Path(args.out)
    write_alert_report(out, rank_alerts(scored), model.vocab)
    for name in args.entity:
        idx = model.vocab.entity_index(name)
        write_alert_report(_entity_filename(out, name), rank_alerts(scored, idx), model.vocab)
    summary = {"events": len(scored), "skipped_unknown": len(unknown)}
    if labeled and len({s.label for s in scored}) >= 2:
        summary["severity_ordering_accuracy"] = severity_ordering_accuracy(scored)
    for k, v in summary.items():
        print(f"{k}\t{v:.6f}" if isinstance(v, float) else f"{k}\t{v}")
    if args.summary:
        write_json_atomic(args.summary, summary)
    return EXIT_OK


# -- sample ----------------------------------------------------------------

def cmd_sample(args) -> int:
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    if args.num_samples < 1:
        raise UsageError("--num-samples must be >= 1")
    positions = parse_positions(args.positions)
    model = _load_model(args.model_file, args.model_kind)
    if model.model_kind == "transe":
        raise UsageError("sampling needs a bilinear model")
    rng = np.random.default_rng(args.seed)
    if args.starts:
        pool = _encode_file(model.vocab, args.starts, args.skip_unknown).triples
        if not len(pool):
            raise ParseError("no usable start triples", source=args.starts)
        starts = pool[rng.integers(len(pool), size=args.num_samples)]
    else:
        E, R = model.num_entities, model.num_relations
        starts = np.stack([rng.integers(E, size=args.num_samples), rng.integers(R, size=args.num_samples),
                           rng.integers(E, size=args.num_samples)], axis=1)
    samples = run_chains(model.params, starts, args.steps, positions, rng)
    write_triples(args.out, decode(model.vocab, samples))
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


# -- synth -----------------------------------------------------------------

def cmd_synth(args) -> int:
    fields = {f.name for f in dataclasses.fields(SynthConfig)}
    cfg = SynthConfig(**{k: v for k, v in vars(args).items() if k in fields and v is not None})
    baseline, events, vocab = synth_industrial_graph(cfg, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_triples(out / "baseline.txt", decode(vocab, baseline))
    write_labeled_events(out / "events.txt", [(vocab.decode_triple(e.triple), e.label) for e in events])
    counts = {cls.label: sum(e.label == cls for e in events) for cls in SeverityClass}
    print(f"baseline\t{len(baseline)}")
    for k, v in counts.items():
        print(f"{k}\t{v}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def _add_common(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--data-dir", default=None, help=f"dataset directory (default ${DATA_DIR_ENV})")


def _add_train_flags(p):
    types = _field_types(TrainConfig)
    for key in TrainConfig.keys():
        if key == "seed":
            continue
        flags = ["--" + key.replace("_", "-")] + FLAG_ALIASES.get(key, [])
        p.add_argument(*flags, dest=key, type=types[key], default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgenergy", description="energy-based knowledge graph embeddings")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("train", help="train a model")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--config", help="key = value file with TrainConfig keys")
    p.add_argument("--preset", choices=sorted({e for e, _ in PRESETS}))
    p.add_argument("--train")
    p.add_argument("--valid", help="triples for per-epoch MRR")
    p.add_argument("--out", default="model.kgeb")
    p.add_argument("--manifest", help="default: <out>.manifest.json")
    p.add_argument("--export-tsv")
    p.add_argument("--replay", help="re-run the config and data of a manifest")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="filtered MRR / hits@k")
    _add_common(p)
    p.add_argument("--model-file", required=True)
    p.add_argument("--model-kind")
    p.add_argument("--test")
    p.add_argument("--filter", action="append", default=[], help="known-true triple file (repeatable)")
    p.add_argument("-k", type=int, action="append")
    p.add_argument("--report", help="metric<TAB>value file (plus .json)")
    p.set_defaults(func=cmd_eval)

    for name in ("score", "rank"):
        p = sub.add_parser(name, help="rank events by suspiciousness")
        _add_common(p)
        p.add_argument("--model-file", required=True)
        p.add_argument("--model-kind")
        p.add_argument("--events", required=True)
        p.add_argument("--out", default="alerts.tsv")
        p.add_argument("--entity", action="append", default=[])
        p.add_argument("--skip-unknown", action="store_true")
        p.add_argument("--summary", help="JSON summary path")
        p.set_defaults(func=cmd_score)

    p = sub.add_parser("sample", help="draw model samples by MH chains")
    _add_common(p)
    p.add_argument("--model-file", required=True)
    p.add_argument("--model-kind")
    p.add_argument("--num-samples", type=int, default=100)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--positions", default="subject,predicate,object")
    p.add_argument("--starts", help="triple file to seed chains from")
    p.add_argument("--skip-unknown", action="store_true")
    p.add_argument("--out", default="samples.txt")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("synth", help="synthetic industrial graph + labeled events")
    _add_common(p)
    p.add_argument("--out-dir", default=".")
    for f in dataclasses.fields(SynthConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=type(f.default), default=None)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.seed is None and args.command != "train":
            args.seed = 0
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ParseError, UnknownSymbolError, persist.FormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
