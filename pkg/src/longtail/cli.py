"""Command-line entry point: analyze, train, evaluate, compare.

Every command is reproducible: the inputs plus the seed fully determine
the outputs, and everything lands under the chosen output directory.
Options can come from a flat ``key = value`` config file via ``--config``;
command-line flags override file values.

Exit codes: 0 success, 2 usage/config errors, 3 data or parse errors,
4 numeric failure (non-finite loss), 5 I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections import OrderedDict
from pathlib import Path

from .analysis import (BIN_LABELS, additional_true_positives, atp_distribution,
                       distribution)
from .errors import (ArgumentError, BuildError, DataError, FormatError, InputError,
                     NumericError, ParseError, ShapeError)
from .evaluation import evaluate, report_json
from .models import (build_model, config_from_mapping, config_to_mapping,
                     load_state_into, load_weights, read_config_text, save_weights,
                     write_config_text)
from .preprocess import Lexicon, load_contractions, load_dataset, normalize_dataset
from .training import cross_validate, predict_labels
from .vocab import EmbeddingMatrix, Vocabulary, encode_dataset, load_embeddings
from . import data as bundled

log = logging.getLogger(__name__)

USAGE_EXIT = 2
DATA_EXIT = 3
NUMERIC_EXIT = 4
IO_EXIT = 5


def _json_dump(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True, indent=2)
        handle.write("\n")


def _load_lexicon_and_contractions(args) -> tuple[Lexicon, dict]:
    lexicon_path = args.lexicon or bundled.data_path("lexicon.txt")
    contractions_path = getattr(args, "contractions", None) or bundled.data_path("contractions.txt")
    return Lexicon.load(lexicon_path), load_contractions(contractions_path)


def _load_normalized(args, dataset_path):
    rows = load_dataset(dataset_path)
    if not rows:
        raise DataError(f"{dataset_path}: dataset has no rows")
    lexicon, contractions = _load_lexicon_and_contractions(args)
    return normalize_dataset(rows, lexicon, contractions)


def _uniqueness_payload(report) -> dict:
    bins = {}
    for idx, label in enumerate(BIN_LABELS):
        bins[label] = {
            "count": report.bin_counts[idx],
            "cumulative_pct": report.cumulative_pct[idx],
            "per_class": {cls: fracs[idx]
                          for cls, fracs in sorted(report.per_class_fractions.items())},
        }
    return {"bins": bins, "n_scored": report.n_scored, "n_skipped": report.n_skipped}


def cmd_analyze(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tweets = _load_normalized(args, args.dataset)
    report = distribution(tweets)
    _json_dump(out_dir / "uniqueness.json", _uniqueness_payload(report))
    with open(out_dir / "scores.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "label", "score", "bin"])
        for tweet_id, label, score, bin_idx in report.entries:
            writer.writerow([tweet_id, label, repr(score), BIN_LABELS[bin_idx]])
    print(f"analyzed {report.n_scored} tweets ({report.n_skipped} skipped) -> {out_dir}")
    return 0


_RUN_KEYS = ("dataset", "embeddings", "embeddings_format", "lexicon", "contractions",
             "non_hate_label", "k", "epochs", "batch")


def _merge_config(args, required: tuple[str, ...]) -> "OrderedDict[str, str]":
    """File values first, then any flag that was actually given."""
    merged: OrderedDict[str, str] = OrderedDict()
    if args.config:
        merged.update(read_config_text(args.config))
    for key in _RUN_KEYS + ("kind", "seed", "seq_len", "emb_dim", "filters", "pool",
                            "pool_stride", "gru_units", "dropout", "second_pooling",
                            "trainable_embeddings", "per_branch_dropout", "vocab"):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = str(value)
    missing = [key for key in required if key not in merged]
    if missing:
        raise ArgumentError(f"missing required option(s): {', '.join(missing)}")
    return merged


def cmd_train(args) -> int:
    merged = _merge_config(args, required=("dataset", "embeddings", "non_hate_label",
                                           "kind", "seed"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = int(merged["seed"])
    k = int(merged.get("k", "5"))
    epochs = int(merged.get("epochs", "10"))
    batch = int(merged.get("batch", "100"))
    emb_format = merged.get("embeddings_format", "word2vec-text")
    non_hate = merged["non_hate_label"]

    tweets = _load_normalized(argparse.Namespace(
        lexicon=merged.get("lexicon"), contractions=merged.get("contractions")),
        merged["dataset"])
    label_names = sorted({t.label for t in tweets})
    merged["n_classes"] = str(len(label_names))
    merged.setdefault("seed", str(seed))
    table = load_embeddings(merged["embeddings"], emb_format)
    merged.setdefault("emb_dim", str(table.dim))
    config = config_from_mapping(merged)

    result = cross_validate(config, tweets, table, non_hate_label=non_hate,
                            k=k, seed=seed, epochs=epochs, batch=batch)

    artifacts: list[str] = []
    for fold, (model, report) in enumerate(zip(result.models, result.fold_reports)):
        weight_name = f"fold{fold}.weights"
        save_weights(out_dir / weight_name, model.state_tensors())
        report_name = f"report_fold{fold}.json"
        with open(out_dir / report_name, "w", encoding="utf-8") as handle:
            handle.write(report_json(report))
        artifacts.extend([weight_name, report_name])
    with open(out_dir / "report_avg.json", "w", encoding="utf-8") as handle:
        handle.write(report_json(result.averaged))
    artifacts.append("report_avg.json")

    result.vocab.save(out_dir / "vocab.txt")
    artifacts.append("vocab.txt")
    run_mapping = OrderedDict()
    for key in _RUN_KEYS:
        if key in merged:
            run_mapping[key] = merged[key]
    run_mapping["non_hate_label"] = non_hate
    run_mapping["vocab"] = "vocab.txt"
    run_mapping.update(config_to_mapping(config))
    write_config_text(out_dir / "config.txt", run_mapping)
    artifacts.append("config.txt")

    _json_dump(out_dir / "train_record.json", [
        {"fold": i, "epoch_losses": rec.epoch_losses, "wall_seconds": rec.wall_seconds,
         "seed": rec.seed, "config": rec.config}
        for i, rec in enumerate(result.records)])
    artifacts.append("train_record.json")

    manifest = {
        "seed": seed,
        "k": k,
        "kind": config.kind,
        "labels": result.label_names,
        "non_hate_label": non_hate,
        "param_count": result.models[0].param_count(),
        "fold_sizes": [int(len(f)) for f in result.split.folds],
        "artifacts": sorted(artifacts + ["manifest.json"]),
    }
    _json_dump(out_dir / "manifest.json", manifest)

    print(f"trained {config.kind} over {k} folds (seed {seed}); "
          f"macro-F1 avg {result.averaged.macro.f1:.4f}, "
          f"hate macro-F1 avg {result.averaged.macro_hate.f1:.4f} -> {out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    merged = _merge_config(args, required=("dataset", "non_hate_label", "kind"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = config_from_mapping(merged)
    config_dir = Path(args.config).parent if args.config else Path(".")
    vocab_path = Path(merged.get("vocab", "vocab.txt"))
    if not vocab_path.is_absolute():
        vocab_path = config_dir / vocab_path
    vocab = Vocabulary.load(vocab_path)

    tensors = load_weights(args.weights)
    if "embedding/table" not in tensors:
        raise FormatError(f"{args.weights}: weight file is missing tensor 'embedding/table'")
    matrix = tensors["embedding/table"]
    if matrix.shape[0] != vocab.size:
        raise FormatError(f"tensor 'embedding/table': {matrix.shape[0]} rows does not match "
                          f"vocabulary size {vocab.size}")
    emb = EmbeddingMatrix(matrix=matrix, dim=int(matrix.shape[1]))
    model = build_model(config, emb)
    load_state_into(model, tensors)

    tweets = _load_normalized(argparse.Namespace(
        lexicon=merged.get("lexicon"), contractions=merged.get("contractions")),
        merged["dataset"])
    gold = [t.label for t in tweets]
    label_names = sorted(set(gold) | {merged["non_hate_label"]})
    if len(label_names) != config.n_classes:
        raise DataError(f"dataset labels {label_names} do not match the "
                        f"{config.n_classes}-class model")
    encoded = encode_dataset(tweets, vocab, config.seq_len)
    pred = predict_labels(model, encoded, label_names, batch=int(merged.get("batch", "100")))

    report = evaluate(gold, pred, label_names, merged["non_hate_label"])
    with open(out_dir / "report.json", "w", encoding="utf-8") as handle:
        handle.write(report_json(report))
    with open(out_dir / "predictions.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "pred_label"])
        for tweet, label in zip(tweets, pred):
            writer.writerow([tweet.id, label])
    print(f"evaluated {len(tweets)} rows; micro-F1 {report.micro.f1:.4f}, "
          f"macro-F1 {report.macro.f1:.4f} -> {out_dir}")
    return 0


def _load_predictions(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["id", "pred_label"]:
            raise ParseError(f"{path}:1: expected header 'id,pred_label', got {header!r}")
        for row in reader:
            if len(row) != 2:
                raise ParseError(f"{path}:{reader.line_num}: expected 2 fields, got {len(row)}")
            if row[0] in out:
                raise DataError(f"{path}: duplicate prediction id {row[0]!r}")
            out[row[0]] = row[1]
    return out


def cmd_compare(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tweets = _load_normalized(args, args.dataset)
    pred_a = _load_predictions(args.pred_a)
    pred_b = _load_predictions(args.pred_b)
    gold = [(t.id, t.label) for t in tweets]
    atp_ids = additional_true_positives(gold, pred_a, pred_b)
    report = distribution(tweets)
    scores = {tweet_id: score for tweet_id, _, score, _ in report.entries}
    atp = atp_distribution(atp_ids, scores)
    payload = {
        "count": atp.count,
        "ids": list(atp.ids),
        "bins": {label: atp.bin_percent[i] for i, label in enumerate(BIN_LABELS)},
    }
    if not atp.count:
        payload["note"] = "no additional true positives"
    _json_dump(out_dir / "atp.json", payload)
    print(f"{atp.count} additional true positives -> {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="longtail",
                                     description="Gapped-window CNN / CNN+GRU tweet "
                                                 "classification and long-tail analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="uniqueness scores and binned distribution")
    analyze.add_argument("--dataset", required=True, help="CSV with header id,label,text")
    analyze.add_argument("--lexicon", help="word-frequency file (default: bundled)")
    analyze.add_argument("--contractions", help="contraction table (default: bundled)")
    analyze.add_argument("--out", required=True, help="output directory")
    analyze.set_defaults(func=cmd_analyze)

    def add_model_options(p):
        p.add_argument("--config", help="flat key=value config file; flags override it")
        p.add_argument("--kind", choices=("base_cnn", "cnn_gru", "cnn_scnn"))
        p.add_argument("--non-hate-label", dest="non_hate_label")
        p.add_argument("--lexicon")
        p.add_argument("--contractions")
        p.add_argument("--seq-len", dest="seq_len", type=int)
        p.add_argument("--emb-dim", dest="emb_dim", type=int)
        p.add_argument("--filters", type=int)
        p.add_argument("--gru-units", dest="gru_units", type=int)
        p.add_argument("--dropout", type=float)
        p.add_argument("--batch", type=int)
        p.add_argument("--second-pooling", dest="second_pooling",
                       choices=("true", "false"))
        p.add_argument("--trainable-embeddings", dest="trainable_embeddings",
                       choices=("true", "false"))
        p.add_argument("--per-branch-dropout", dest="per_branch_dropout",
                       choices=("true", "false"))

    train = sub.add_parser("train", help="k-fold cross-validated training run")
    train.add_argument("--dataset")
    train.add_argument("--embeddings")
    train.add_argument("--embeddings-format", dest="embeddings_format",
                       choices=("word2vec-text", "glove-text"))
    train.add_argument("--k", type=int)
    train.add_argument("--epochs", type=int)
    train.add_argument("--seed", type=int, required=True,
                       help="run seed (required: no silent nondeterminism)")
    train.add_argument("--out", required=True)
    add_model_options(train)
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="apply saved weights to a dataset")
    ev.add_argument("--weights", required=True)
    ev.add_argument("--dataset")
    ev.add_argument("--out", required=True)
    ev.add_argument("--seed", type=int)
    add_model_options(ev)
    ev.set_defaults(func=cmd_evaluate)

    compare = sub.add_parser("compare", help="additional-true-positive distribution")
    compare.add_argument("--dataset", required=True)
    compare.add_argument("--lexicon")
    compare.add_argument("--contractions")
    compare.add_argument("--pred-a", dest="pred_a", required=True,
                         help="predictions CSV for the candidate method")
    compare.add_argument("--pred-b", dest="pred_b", required=True,
                         help="predictions CSV for the reference method")
    compare.add_argument("--out", required=True)
    compare.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, DataError, FormatError) as err:
        print(f"error: {err}", file=sys.stderr)
        return DATA_EXIT
    except NumericError as err:
        print(f"error: {err}", file=sys.stderr)
        return NUMERIC_EXIT
    except (ArgumentError, BuildError, ShapeError, InputError) as err:
        print(f"error: {err}", file=sys.stderr)
        return USAGE_EXIT
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return IO_EXIT


if __name__ == "__main__":
    sys.exit(main())
