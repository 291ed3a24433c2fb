"""Command-line entry point.

Subcommands: train, eval, score, motif-stats, hyperbolicity, gradcheck.
Exit codes partition failures: 2 config, 3 data, 4 numeric divergence,
5 degenerate metric (single-class test split), 6 gradient check failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys

from .config import parse_config_file, parse_setting, derive_seed
from .data import make_split, parse_tudataset, write_ingestion_report
from .errors import (
    BatchError,
    CapExceededError,
    ConfigError,
    ConsistencyError,
    DegenerateSplitError,
    DivergenceError,
    IngestionError,
    MetricUndefinedError,
)
from .gradcheck import REL_TOL, run_gradcheck
from .hypergraph import motif_stats
from .hyperbolicity import corpus_report
from .trainer import (
    EncoderParams,
    TrainConfig,
    evaluate,
    prepare_corpus_bundles,
    score_graphs,
    train,
    write_loss_curve,
    write_scores_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4
EXIT_METRIC = 5
EXIT_GRADCHECK = 6

_TRAIN_FIELDS = {f.name for f in dataclasses.fields(TrainConfig)}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hcglad")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--dataset", help="dataset name (file prefix)")
        p.add_argument("--data-dir", help="directory with <DS>_*.txt files")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override any config key (repeatable)",
        )

    common(sub.add_parser("train", help="train on the normal split"))
    p_eval = sub.add_parser("eval", help="score the test split and report AUC")
    common(p_eval)
    p_eval.add_argument("--params", required=True, help="parameter snapshot from train")
    p_score = sub.add_parser("score", help="write anomaly scores without AUC")
    common(p_score)
    p_score.add_argument("--params", required=True)
    common(sub.add_parser("motif-stats", help="per-graph hypergraph statistics CSV"))
    p_hyp = sub.add_parser("hyperbolicity", help="four-point hyperbolicity CSV")
    common(p_hyp)
    p_hyp.add_argument("--mode", choices=["auto", "exhaustive", "sampled"], default="auto")
    p_hyp.add_argument("--samples", type=int, default=100_000)
    p_hyp.add_argument("--cap", type=int, default=40)
    p_hyp.add_argument("--aggregate", choices=["max", "mean"], default="max")
    p_grad = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--geometry", choices=["lorentz", "flat"], default="lorentz")
    return parser


def _merge_config(args) -> tuple[TrainConfig, dict]:
    merged: dict = {}
    if args.config:
        merged.update(parse_config_file(args.config))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        merged.update(parse_setting(key.strip(), value.strip()))
    if args.dataset:
        merged["dataset"] = args.dataset
    if getattr(args, "data_dir", None):
        merged["data_dir"] = args.data_dir
    if args.out:
        merged["out"] = args.out
    if args.seed is not None:
        merged["seed"] = args.seed
    run_keys = {k: merged.pop(k) for k in ("dataset", "data_dir", "out") if k in merged}
    unknown = set(merged) - _TRAIN_FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return TrainConfig(**merged), run_keys


def _load_corpus(run_keys: dict):
    if "dataset" not in run_keys or "data_dir" not in run_keys:
        raise ConfigError("dataset and data_dir are required (config file or flags)")
    if not os.path.isdir(run_keys["data_dir"]):
        raise IngestionError(f"data directory not found: {run_keys['data_dir']}")
    return parse_tudataset(run_keys["data_dir"], run_keys["dataset"])


def _out_dir(run_keys: dict) -> str:
    out = run_keys.get("out", "out")
    os.makedirs(out, exist_ok=True)
    return out


def cmd_train(args) -> int:
    config, run_keys = _merge_config(args)
    config.validate()
    corpus = _load_corpus(run_keys)
    out = _out_dir(run_keys)
    split = make_split(
        corpus, config.anomaly_class, config.train_fraction, derive_seed(config.seed, "split")
    )
    result = train(corpus, split, config)
    result.params.save(os.path.join(out, "params.hcglad"))
    write_loss_curve(result.loss_curve, os.path.join(out, "loss_curve.csv"))
    write_ingestion_report(corpus, os.path.join(out, "ingestion_report.json"))
    final = result.loss_curve[-1]["L_total"] if result.loss_curve else float("nan")
    print(f"trained {config.epochs} epochs on {len(split.train_ids)} graphs; final L_total={final:.6f}")
    return EXIT_OK


def _eval_common(args):
    config, run_keys = _merge_config(args)
    config.validate()
    corpus = _load_corpus(run_keys)
    out = _out_dir(run_keys)
    params = EncoderParams.load(args.params)
    split = make_split(
        corpus, config.anomaly_class, config.train_fraction, derive_seed(config.seed, "split")
    )
    return config, corpus, out, params, split


def cmd_eval(args) -> int:
    config, corpus, out, params, split = _eval_common(args)
    report = evaluate(params, corpus, split, config)
    with open(os.path.join(out, "eval_report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    write_scores_csv(report, os.path.join(out, "scores.csv"))
    print(f"AUC={report.auc:.4f}")
    return EXIT_OK


def cmd_score(args) -> int:
    config, corpus, out, params, split = _eval_common(args)
    bundles = prepare_corpus_bundles(corpus, config)
    scores = score_graphs(params, corpus, split.test_ids, config, bundles)
    labels = {g.id: int(g.graph_label == split.anomaly_class) for g in corpus.graphs}
    with open(os.path.join(out, "scores.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["graph_id", "score", "label"])
        for gid in sorted(scores):
            writer.writerow([gid, f"{scores[gid]:.12g}", labels[gid]])
    print(f"scored {len(scores)} graphs")
    return EXIT_OK


def cmd_motif_stats(args) -> int:
    config, run_keys = _merge_config(args)
    corpus = _load_corpus(run_keys)
    out = _out_dir(run_keys)
    rows = motif_stats(corpus)
    path = os.path.join(out, "motif_stats.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=["graph_id", "n", "edges", "triangles", "motif_hyperedges", "pairwise_hyperedges"],
        )
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {path} ({len(rows)} graphs)")
    return EXIT_OK


def cmd_hyperbolicity(args) -> int:
    config, run_keys = _merge_config(args)
    corpus = _load_corpus(run_keys)
    out = _out_dir(run_keys)
    rows, aggregates = corpus_report(
        corpus,
        mode=args.mode,
        aggregate=args.aggregate,
        cap=args.cap,
        samples=args.samples,
        seed=derive_seed(config.seed, "sampling"),
    )
    path = os.path.join(out, "hyperbolicity.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["dataset", "graph_id", "delta_worst", "delta_avg", "quadruples", "mode"]
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    **row,
                    "delta_worst": f"{row['delta_worst']:.6g}",
                    "delta_avg": f"{row['delta_avg']:.6g}",
                }
            )
    print(
        f"{aggregates['dataset']}: delta={aggregates['delta']:.4f} "
        f"delta_avg={aggregates['delta_avg']:.4f} ({aggregates['aggregate']} over "
        f"{aggregates['graphs']} graphs)"
    )
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    result = run_gradcheck(seed=args.seed, geometry=args.geometry)
    for row in result.rows:
        print(f"{row.name:40s} {str(row.shape):>10s} rel_err={row.rel_err:.3e}")
    print(f"max_rel_err={result.max_rel_err:.3e} (tolerance {REL_TOL:.0e})")
    if not result.passed:
        print(f"FAIL: worst parameter {result.worst_param}", file=sys.stderr)
        return EXIT_GRADCHECK
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "score": cmd_score,
    "motif-stats": cmd_motif_stats,
    "hyperbolicity": cmd_hyperbolicity,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestionError, ConsistencyError, DegenerateSplitError, BatchError,
            CapExceededError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except MetricUndefinedError as exc:
        print(f"metric undefined: {exc}", file=sys.stderr)
        return EXIT_METRIC


if __name__ == "__main__":
    sys.exit(main())
