"""Command-line experiment runner.

    xferqa <subcommand> --config <path> [--seed N] [--strategy S] [--lambda X] [--out DIR]

Subcommands: ingest-check, train, search-lambda, cluster-audit, evaluate,
report. Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .corpus import load_corpus
from .embeddings import load_embeddings
from .errors import ConfigError, DataError, NumericError
from .experiment import (
    ExperimentConfig,
    ingest_stats,
    lambda_table,
    load_config,
    report,
    run,
    run_cluster_audit,
    run_lambda_search,
)
from .metrics import DEFAULT_THRESHOLD_GRID, evaluate_groups, select_threshold
from .model import load_checkpoint
from .train import score_corpus_split

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _config_from_args(args) -> ExperimentConfig:
    overrides = {
        "seed": args.seed,
        "strategy": args.strategy,
        "lambda": getattr(args, "lambda_", None),
        "out_dir": args.out,
    }
    return load_config(args.config, overrides)


def cmd_ingest_check(args) -> int:
    config = _config_from_args(args)
    config.validate(need_embeddings=False, need_source=False)
    for path, role in ((config.target_corpus, "target"), (config.source_corpus, "source")):
        if not path:
            continue
        corpus = load_corpus(path, Path(path).stem)
        print(f"[{role}] loaded {corpus.name} from {path}")
        for line in ingest_stats(corpus):
            print("  " + line)
    print("ingest-check: ok")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _config_from_args(args)
    paths = run(config)
    for name, path in paths.items():
        print(f"wrote {name}: {path}")
    return EXIT_OK


def cmd_search_lambda(args) -> int:
    config = _config_from_args(args)
    best, records = run_lambda_search(config)
    text, tsv = lambda_table(records, best)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "lambda_table.txt").write_text(text, encoding="utf-8")
    (out_dir / "lambda_table.tsv").write_text(tsv, encoding="utf-8")
    print(text, end="")
    print(f"best lambda: {best:g}")
    return EXIT_OK


def cmd_cluster_audit(args) -> int:
    config = _config_from_args(args)
    summary = run_cluster_audit(config, config.out_dir)
    print(f"clusters: k={summary['k']}, sizes={summary['cluster_sizes']}")
    print(
        f"source train: kept {summary['kept']} of {summary['n_source_train']} "
        f"(realized keep fraction {summary['realized_keep_fraction']:.4f})"
    )
    print(f"wrote audit: {summary['audit_path']}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _config_from_args(args)
    config.validate(need_source=False)
    params, dims = load_checkpoint(args.checkpoint)
    table = load_embeddings(config.embeddings)
    if dims.embed_dim != table.dim:
        raise DataError(
            f"checkpoint embed_dim {dims.embed_dim} does not match embedding table dim {table.dim}"
        )
    corpus = load_corpus(config.target_corpus, Path(config.target_corpus).stem)
    grid = tuple(config.threshold_grid) if config.threshold_grid else DEFAULT_THRESHOLD_GRID
    threshold = args.threshold
    if threshold is None and args.split != "dev":
        threshold = select_threshold(score_corpus_split(params, corpus, "dev", table, dims), grid)
    rep = evaluate_groups(
        score_corpus_split(params, corpus, args.split, table, dims),
        threshold=threshold,
        threshold_grid=grid,
    )
    doc = json.dumps(rep.to_dict(), sort_keys=True, indent=2)
    print(doc)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"eval_{args.split}.json").write_text(doc + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_report(args) -> int:
    text, tsv = report(args.results_dirs)
    print(text, end="")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(text, encoding="utf-8")
        (out_dir / "report.tsv").write_text(tsv, encoding="utf-8")
        print(f"wrote report to {out_dir}")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser, config_required: bool = True) -> None:
    parser.add_argument("--config", required=config_required, help="path to the JSON experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument(
        "--strategy", choices=("base", "init", "mult", "iss-mult"), default=None,
        help="override the config strategy",
    )
    parser.add_argument(
        "--lambda", dest="lambda_", type=float, default=None, help="override the mixing weight"
    )
    parser.add_argument("--out", default=None, help="override the output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xferqa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"xferqa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-check", help="load and validate the configured corpora")
    _add_common(p)
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("train", help="run one training strategy and write artifacts")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("search-lambda", help="grid-search the mixing weight")
    _add_common(p)
    p.set_defaults(func=cmd_search_lambda)

    p = sub.add_parser("cluster-audit", help="cluster target dev, dump the source filter audit")
    _add_common(p)
    p.set_defaults(func=cmd_cluster_audit)

    p = sub.add_parser("evaluate", help="score a corpus split with a saved checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint JSON to load")
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--threshold", type=float, default=None, help="fixed triggering threshold")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render a metrics grid over finished run directories")
    p.add_argument("results_dirs", nargs="+", help="run output directories")
    p.add_argument("--out", default=None, help="directory for report.txt / report.tsv")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
