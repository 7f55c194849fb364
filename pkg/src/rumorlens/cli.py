"""Command-line entry point.

Structured results go to stdout as JSON; diagnostics go to stderr.  Exit
status is 0 on success, 1 on a usage error and 2 on bad or missing data.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from rumorlens import __version__
from rumorlens.classifier import evaluate_retrieval, predict, predict_many
from rumorlens.contrastive import (
    LossConfig,
    SamplePair,
    batch_loss,
    contrastive_loss,
    loss_gradient,
    mine_hard_pairs,
    train_embeddings,
)
from rumorlens.core import summarize
from rumorlens.exceptions import ParseError, RumorLensError
from rumorlens.hnsw import HnswIndex
from rumorlens.io import (
    FORMAT_VERSION,
    PipelineConfig,
    load_config,
    load_index,
    load_records,
    read_vector,
    save_index,
    write_records,
)
from rumorlens.metrics import format_report, metrics_report
from rumorlens.phash import FrameHash, dedup_stream, load_image, parse_hash, phash
from rumorlens.textfusion import Origin, concat_text, merge_streams, read_timed_text

log = logging.getLogger("rumorlens")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(obj, out):
    out.write(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    return cfg.override(**{
        "k": getattr(args, "k", None),
        "dim": getattr(args, "dim", None),
        "hnsw.M": getattr(args, "M", None),
        "hnsw.ef_construction": getattr(args, "ef_construction", None),
        "hnsw.ef_search": getattr(args, "ef_search", None),
        "hnsw.rng_seed": getattr(args, "seed", None) if args.command == "ingest" else None,
        "loss.margin": getattr(args, "margin", None),
    })


def _read_jsonl(path):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append((lineno, json.loads(line)))
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno, path=path) from None
    return out


# -- subcommands -----------------------------------------------------------


def cmd_ingest(args, out):
    cfg = _config(args)
    records = load_records(args.input, cfg.dim)
    if not records and cfg.dim is None:
        raise ParseError("no records to ingest and no --dim given", path=args.input)
    dim = cfg.dim or records[0].dim
    index = HnswIndex(dim, cfg.hnsw)
    for r in records:
        index.insert(r)
    save_index(index, args.index)
    log.info("indexed %d records into %s", len(index), args.index)
    _emit({"index": args.index, "count": len(index), "dim": dim,
           "summary": summarize(records).to_dict()}, out)


def cmd_query(args, out):
    cfg = _config(args)
    index = load_index(args.index)
    pred = predict(index, read_vector(args.vector), cfg.k, ef_search=args.ef_search)
    _emit(pred.to_dict(), out)


def cmd_evaluate(args, out):
    cfg = _config(args)
    index = load_index(args.index)
    test = load_records(args.test, index.dim)
    preds = predict_many(index, [r.vector for r in test], cfg.k, jobs=args.jobs)
    actual = [int(r.label) for r in test]
    predicted = [int(p.label) for p in preds]
    scores = [p.rumor_score for p in preds]
    if args.dump_pairs:
        with open(args.dump_pairs, "w", encoding="utf-8") as fh:
            for r, p in zip(test, preds):
                fh.write(json.dumps({"id": r.id, "actual": int(r.label), "predicted": int(p.label),
                                     "rumor_score": p.rumor_score}) + "\n")
    report = metrics_report(actual, predicted, scores)
    if args.format == "text":
        out.write(format_report(report) + "\n")
    else:
        _emit(report, out)


def cmd_retrieval_eval(args, out):
    cfg = _config(args)
    index = load_index(args.index)
    queries = load_records(args.queries, index.dim)
    rate = evaluate_retrieval(index, queries, cfg.k)
    _emit({"k": cfg.k, "queries": len(queries), "hit_rate": rate}, out)


def cmd_dedup_frames(args, out):
    frames = []
    for pos, (lineno, obj) in enumerate(_read_jsonl(args.input)):
        try:
            if "hash" in obj:
                h = parse_hash(obj["hash"])
            elif "image" in obj:
                h = phash(load_image(obj["image"]))
            else:
                raise KeyError("hash")
            frames.append(FrameHash(h, int(obj.get("index", pos)), float(obj.get("timestamp", 0.0))))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, RumorLensError) and not isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad frame record: {exc}", line=lineno, path=args.input) from None
    kept = dedup_stream(frames, args.window, args.threshold)
    _emit({"input": len(frames), "retained": len(kept), "frames": [f.to_dict() for f in kept]}, out)


def cmd_fuse_text(args, out):
    audio = read_timed_text(args.audio, default_origin=Origin.AUDIO) if args.audio else []
    image = read_timed_text(args.image, default_origin=Origin.IMAGE) if args.image else []
    merged = merge_streams(audio, image, args.threshold, args.lookback)
    _emit({"segments": [s.to_dict() for s in merged], "text": concat_text(merged)}, out)


def cmd_loss(args, out):
    cfg = _config(args)
    batch = []
    for lineno, obj in _read_jsonl(args.pairs):
        try:
            batch.append(SamplePair(obj["a"], obj["b"], int(obj.get("label", obj.get("pair_label")))))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad pair record: {exc}", line=lineno, path=args.pairs) from None
    hard = mine_hard_pairs(batch, cfg.loss.margin) if args.online else batch
    selected = {id(p) for p in hard}
    per_pair = []
    for i, p in enumerate(batch):
        ga, gb = loss_gradient(p, cfg.loss)
        per_pair.append({"index": i, "pair_label": p.pair_label, "distance": p.distance,
                         "loss": contrastive_loss(p, cfg.loss), "selected": id(p) in selected,
                         "grad_a": ga.tolist(), "grad_b": gb.tolist()})
    _emit({"margin": cfg.loss.margin, "online": args.online, "n_pairs": len(batch),
           "n_selected": len(hard), "loss": batch_loss(batch, cfg.loss, args.online),
           "pairs": per_pair}, out)


def cmd_train(args, out):
    cfg = _config(args)
    records = load_records(args.input, cfg.dim)
    run = train_embeddings(records, cfg.loss, args.epochs, args.lr, args.seed)
    write_records(args.output, run.records)
    _emit({"output": args.output, "records": len(run.records), "initial_loss": run.initial_loss,
           "final_loss": run.final_loss, "best_epoch": run.best_epoch}, out)


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rumorlens", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="store_true", help="print package and index format versions")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--config", help="JSON pipeline config; flags override it")
        return p

    p = add("ingest", cmd_ingest, "build and save an HNSW index from JSONL records")
    p.add_argument("--input", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--dim", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--ef-construction", type=int)
    p.add_argument("--ef-search", type=int)
    p.add_argument("--seed", type=int)

    p = add("query", cmd_query, "classify one vector against an index")
    p.add_argument("--index", required=True)
    p.add_argument("--vector", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--ef-search", type=int)

    p = add("evaluate", cmd_evaluate, "classify a labelled test set and report metrics")
    p.add_argument("--index", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--dump-pairs", help="write (actual, predicted, score) per record as JSONL")
    p.add_argument("--format", choices=("json", "text"), default="json")

    p = add("retrieval-eval", cmd_retrieval_eval, "same-event hit rate in the top k")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int)

    p = add("dedup-frames", cmd_dedup_frames, "drop near-duplicate frames by perceptual hash")
    p.add_argument("--input", required=True)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--threshold", type=int, default=8, help="Hamming distance below which frames match")

    p = add("fuse-text", cmd_fuse_text, "merge audio and image text streams")
    p.add_argument("--audio")
    p.add_argument("--image")
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--lookback", type=float, default=30.0)

    p = add("loss", cmd_loss, "contrastive loss and gradients for a batch of pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--online", action="store_true")
    p.add_argument("--margin", type=float)

    p = add("train", cmd_train, "contrastive training directly on stored vectors")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--margin", type=float)
    return parser


def run_command(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=err)
    if args.version:
        out.write(f"rumorlens {__version__} (index format {FORMAT_VERSION})\n")
        return 0
    if not args.command:
        err.write(parser.format_usage())
        return 1
    try:
        args.func(args, out)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return 1
    except (RumorLensError, OSError) as exc:
        if isinstance(exc, OSError) and exc.filename:
            err.write(f"error: {exc.filename}: {exc.strerror}\n")
        else:
            err.write(f"error: {exc}\n")
        return 2
    return 0


def main():
    sys.exit(run_command())
