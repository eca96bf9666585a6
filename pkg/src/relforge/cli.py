"""Batch command-line interface: normalize, inject, train, predict, score, calibrate, evaluate.

Each subcommand wraps one library operation and composes with the others
through files only. Exit codes: 0 success, 1 usage/config error, 2 data
error, 3 internal error; failures emit a JSON object on stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import calibrate as cal
from . import dataio, lexical, metrics, pathcat, textnorm
from .errors import ConfigError, DataError
from .toymodel import DistillConfig, SmoothingConfig, load_model, predict, save_model, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit(2); we want exit 1
        raise UsageError(message)


def _emit_error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False))


def _load_norm_config(args: argparse.Namespace) -> textnorm.NormConfig:
    config = textnorm.load_config(args.config) if args.config else textnorm.NormConfig()
    if getattr(args, "promo", False) and not config.promo_enabled:
        config = dataclasses.replace(config, promo_enabled=True)
    return config


def _read_records(args: argparse.Namespace) -> dataio.ReadReport:
    return dataio.read_records(args.input, task=args.task, fmt=args.format, strict=args.strict)


def _leaf_key(record: dataio.Record, args: argparse.Namespace) -> str | None:
    if record.cate_path is None:
        return None
    path = pathcat.parse_path(record.cate_path, args.separator)
    if getattr(args, "key_by", "leaf") == "path":
        return record.cate_path
    return pathcat.leaf_of(path)


def _target_tokens_text(record: dataio.Record, args: argparse.Namespace) -> str:
    if record.task == "QI":
        return record.target_text()
    return " ".join(pathcat.parse_path(record.cate_path, args.separator).levels)


def _join_by_id(
    preds: list[dataio.Prediction], records: list[dataio.Record]
) -> list[tuple[dataio.Prediction, dataio.Record]]:
    by_id = {r.id: r for r in records}
    out = []
    for p in preds:
        record = by_id.get(p.id)
        if record is None:
            raise DataError(f"prediction id {p.id!r} has no matching record")
        out.append((p, record))
    return out


# --- subcommands ---------------------------------------------------------------


def cmd_normalize(args: argparse.Namespace) -> int:
    config = _load_norm_config(args)
    report = _read_records(args)
    counts: dict[textnorm.RuleId, int] = {}
    out_records = []
    for r in report.records:
        changes = {
            "origin_query": textnorm.normalize(r.origin_query, config, counts),
            "query_en": None if r.query_en is None else textnorm.normalize(r.query_en, config, counts),
            "item_title": None if r.item_title is None else textnorm.normalize(r.item_title, config, counts),
            "title_en": None if r.title_en is None else textnorm.normalize(r.title_en, config, counts),
        }
        if r.cate_path is not None:
            levels = []
            for level in pathcat.parse_path(r.cate_path, args.separator).levels:
                cleaned = textnorm.normalize(level, config, counts)
                if not cleaned:
                    raise DataError(f"record {r.id!r}: category level {level!r} normalized to empty")
                levels.append(cleaned)
            changes["cate_path"] = args.separator.join(levels)
        out_records.append(dataclasses.replace(r, **changes))
    dataio.write_records(out_records, args.output)
    _print_json(
        {
            "records": len(out_records),
            "skipped": len(report.skipped),
            "rule_counts": {rule.value: n for rule, n in sorted(counts.items())},
        }
    )
    return 0


def cmd_inject(args: argparse.Namespace) -> int:
    report = _read_records(args)
    out_records = []
    injected = 0
    for r in report.records:
        if r.cate_path is not None:
            marked = pathcat.inject_levels(pathcat.parse_path(r.cate_path, args.separator))
            r = dataclasses.replace(r, cate_path=marked)
            injected += 1
        out_records.append(r)
    dataio.write_records(out_records, args.output)
    _print_json({"records": len(out_records), "injected": injected, "skipped": len(report.skipped)})
    return 0


def _training_pairs(
    records: list[dataio.Record], args: argparse.Namespace
) -> list[tuple[str, str, int]]:
    pairs = []
    for r in records:
        if r.label is None:
            continue
        if r.task == "QC":
            target = pathcat.inject_levels(pathcat.parse_path(r.cate_path, args.separator))
        else:
            target = r.target_text()
        pairs.append((r.query_text(), target, r.label))
    if not pairs:
        raise DataError("no labeled records to train on")
    return pairs


def cmd_train(args: argparse.Namespace) -> int:
    report = _read_records(args)
    pairs = _training_pairs(report.records, args)
    smoothing = SmoothingConfig(epsilon=args.epsilon)
    distill = DistillConfig(
        alpha=args.alpha,
        temperature=args.temperature,
        ema_decay=args.ema_decay,
        dropout_rate=args.dropout,
    )
    history: list[float] = []
    params = train(
        pairs,
        smoothing,
        distill,
        epochs=args.epochs,
        lr=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
        hash_bits=args.hash_bits,
        loss_history=history,
    )
    save_model(params, args.model)
    _print_json(
        {
            "trained_on": len(pairs),
            "skipped": len(report.skipped),
            "epochs": args.epochs,
            "seed": args.seed,
            "epoch_loss": history,
            "model": args.model,
        }
    )
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    report = _read_records(args)
    params = load_model(args.model)
    pairs = []
    for r in report.records:
        if r.task == "QC":
            target = pathcat.inject_levels(pathcat.parse_path(r.cate_path, args.separator))
        else:
            target = r.target_text()
        pairs.append((r.query_text(), target))
    probs = predict(params, pairs, use_teacher=args.use_teacher)
    preds = [
        dataio.Prediction(id=r.id, prob=float(p), leaf=_leaf_key(r, args))
        for r, p in zip(report.records, probs)
    ]
    dataio.write_predictions(preds, args.output)
    _print_json(
        {
            "predictions": len(preds),
            "skipped": len(report.skipped),
            "use_teacher": args.use_teacher,
            "seed": args.seed,
        }
    )
    return 0


def _weights_from_args(args: argparse.Namespace) -> lexical.HybridWeights:
    if args.table:
        with open(args.table, encoding="utf-8") as fh:
            return cal.CalibrationTable.from_json(fh.read()).hybrid_weights
    return lexical.HybridWeights(args.w_p, args.w_j, args.w_c)


def cmd_score(args: argparse.Namespace) -> int:
    report = _read_records(args)
    preds = dataio.read_predictions(args.preds)
    weights = _weights_from_args(args)
    out = []
    for p, r in _join_by_id(preds, report.records):
        q = lexical.tokenize(r.query_text())
        t = lexical.tokenize(_target_tokens_text(r, args))
        blended = lexical.hybrid_score(p.prob, lexical.jaccard(q, t), lexical.containment(q, t), weights)
        out.append(dataio.Prediction(id=p.id, prob=blended, leaf=p.leaf))
    dataio.write_predictions(out, args.output)
    _print_json({"scored": len(out), "weights": weights.as_dict()})
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    report = _read_records(args)
    preds = dataio.read_predictions(args.preds)
    joined = _join_by_id(preds, report.records)
    for _, r in joined:
        if r.label is None:
            raise DataError(f"record {r.id!r} has no label; calibration needs labeled data")
    grid = cal.ThresholdGrid(lo=args.grid_lo, hi=args.grid_hi, step=args.grid_step)

    if args.mode == "hybrid":
        rows = []
        for p, r in joined:
            q = lexical.tokenize(r.query_text())
            t = lexical.tokenize(_target_tokens_text(r, args))
            rows.append((p.prob, lexical.jaccard(q, t), lexical.containment(q, t), r.label))
        weights, threshold = cal.tune_hybrid_weights(rows, grid, weight_step=args.weight_step)
        table = cal.CalibrationTable(
            global_threshold=threshold,
            min_leaf_support=args.min_leaf_support,
            hybrid_weights=weights,
            grid=grid,
        )
    elif args.mode == "leaf":
        triples = []
        for p, r in joined:
            leaf = _leaf_key(r, args)
            if leaf is None:
                raise DataError(f"record {r.id!r} has no category path; use --mode global for QI data")
            triples.append((p.prob, r.label, leaf))
        table = cal.tune_leaf_thresholds(triples, grid, min_leaf_support=args.min_leaf_support)
    else:  # global
        threshold = cal.tune_global_threshold([p.prob for p, _ in joined], [r.label for _, r in joined], grid)
        table = cal.CalibrationTable(
            global_threshold=threshold, min_leaf_support=args.min_leaf_support, grid=grid
        )

    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(table.to_json() + "\n")
    _print_json(
        {
            "mode": args.mode,
            "global_threshold": table.global_threshold,
            "leaf_thresholds": len(table.leaf_thresholds),
            "table": args.output,
        }
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    report = _read_records(args)
    preds = dataio.read_predictions(args.preds)
    joined = _join_by_id(preds, report.records)
    for _, r in joined:
        if r.label is None:
            raise DataError(f"record {r.id!r} has no label; evaluation needs gold labels")
    if args.table:
        with open(args.table, encoding="utf-8") as fh:
            table = cal.CalibrationTable.from_json(fh.read())
    else:
        table = cal.CalibrationTable(
            global_threshold=args.threshold, grid=cal.ThresholdGrid(args.threshold, args.threshold, 0.02)
        )
    decisions = cal.apply_calibration([(p.prob, p.leaf) for p, _ in joined], table)
    gold = [r.label for _, r in joined]
    result = metrics.report(decisions, gold)
    if args.by_language:
        by_lang: dict[str, dict] = {}
        for language in sorted({r.language for _, r in joined}):
            idx = [i for i, (_, r) in enumerate(joined) if r.language == language]
            by_lang[language] = metrics.report([decisions[i] for i in idx], [gold[i] for i in idx])
        result["by_language"] = by_lang
    _print_json(result)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2, sort_keys=True, ensure_ascii=False)
            fh.write("\n")
    return 0


# --- parser --------------------------------------------------------------------


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="seed for all randomness")
    common.add_argument("--strict", dest="strict", action="store_true", default=True,
                        help="abort on the first malformed record (default)")
    common.add_argument("--lenient", dest="strict", action="store_false",
                        help="skip malformed records and report counts")
    common.add_argument("--config", default=None, help="normalization config JSON")
    common.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl",
                        help="records file format")
    common.add_argument("--task", choices=dataio.TASKS, default="QI",
                        help="record schema to validate against")
    common.add_argument("--separator", default=",", help="category path separator")

    parser = _Parser(prog="relforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", parents=[common], help="clean and normalize record text fields")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--promo", action="store_true", help="enable promotional-phrase removal")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("inject", parents=[common], help="inject [Lk] depth markers into category paths")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(func=cmd_inject, task="QC")

    p = sub.add_parser("train", parents=[common], help="train the relevance classifier")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--model", required=True, help="output model path")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epsilon", type=float, default=0.05, help="label smoothing")
    p.add_argument("--alpha", type=float, default=0.5, help="CE weight in the combined loss")
    p.add_argument("--temperature", type=float, default=2.5, help="distillation temperature")
    p.add_argument("--ema-decay", type=float, default=0.999)
    p.add_argument("--dropout", type=float, default=0.20)
    p.add_argument("--hash-bits", type=int, default=18)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="write model probabilities for records")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--use-teacher", action="store_true", help="score with the EMA teacher weights")
    p.add_argument("--key-by", choices=("leaf", "path"), default="leaf",
                   help="key predictions by leaf name or full path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("score", parents=[common], help="blend model probability with lexical overlap")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--preds", required=True, help="model predictions JSONL")
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--table", default=None, help="calibration table supplying hybrid weights")
    p.add_argument("--w-p", type=float, default=1.0)
    p.add_argument("--w-j", type=float, default=0.0)
    p.add_argument("--w-c", type=float, default=0.0)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("calibrate", parents=[common], help="tune decision thresholds and hybrid weights")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--out", dest="output", required=True, help="output calibration table JSON")
    p.add_argument("--mode", choices=("leaf", "global", "hybrid"), default="leaf")
    p.add_argument("--min-leaf-support", type=int, default=20)
    p.add_argument("--grid-lo", type=float, default=0.30)
    p.add_argument("--grid-hi", type=float, default=0.70)
    p.add_argument("--grid-step", type=float, default=0.02)
    p.add_argument("--weight-step", type=float, default=0.05)
    p.add_argument("--key-by", choices=("leaf", "path"), default="leaf")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", parents=[common], help="positive-class F1 report")
    p.add_argument("--in", dest="input", required=True, help="gold records")
    p.add_argument("--preds", required=True)
    p.add_argument("--table", default=None, help="calibration table with thresholds")
    p.add_argument("--threshold", type=float, default=0.5, help="flat threshold when no table given")
    p.add_argument("--by-language", action="store_true")
    p.add_argument("--out", dest="output", default=None, help="also write the report to a file")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        _emit_error("usage", str(exc))
        return 1
    except (DataError, OSError) as exc:
        _emit_error("data", str(exc))
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        _emit_error("internal", f"{type(exc).__name__}: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
