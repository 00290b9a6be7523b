"""Experiment orchestration: flat JSON configs, artifact writing, reports.

A config is one flat JSON object per experiment; CLI flags override file
values. A finished run leaves five artifacts in the output directory:
checkpoint.json, progress.jsonl, eval_dev.json, eval_test.json, and
manifest.json. The manifest echoes the resolved config plus input
checksums and is itself a valid config, so feeding it back reproduces the
run byte for byte.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .corpus import Corpus, hit_rate, load_corpus
from .embeddings import SENTENCE_PARTS, load_embeddings
from .errors import ConfigError, DataError
from .estimators import STRATEGIES
from .iss import cluster_and_filter, write_filter_audit
from .metrics import DEFAULT_THRESHOLD_GRID, EvalReport, evaluate_groups
from .model import resolve_dims, save_checkpoint
from .train import CHECKPOINT_METRICS, DEFAULT_LAMBDA_GRID, LAMBDA_SIDES, TrainConfig, search_lambda

MANIFEST_EXTRAS = ("corpus_checksums", "package_version")

ARTIFACTS = ("checkpoint.json", "progress.jsonl", "eval_dev.json", "eval_test.json", "manifest.json")


@dataclass
class ExperimentConfig:
    """Flat experiment description; JSON key "lambda" maps to lambda_."""

    target_corpus: str = ""
    source_corpus: str | None = None
    embeddings: str = ""
    dims: str | dict = "desk"
    strategy: str = "base"
    lambda_: float = 0.9
    lambda_applies_to: str = "target"
    learning_rate: float = 0.05
    epochs: int = 5
    batch_size: int = 1
    seed: int = 0
    checkpoint_metric: str = "MAP"
    freeze_lower_layers: bool = False
    source_epochs: int | None = None
    source_learning_rate: float | None = None
    source_seed: int | None = None
    k: int | None = None
    keep_fraction: float = 0.8
    iss_text: str = "pair"
    lambda_grid: list | None = None
    threshold_grid: list | None = None
    out_dir: str = "xferqa_run"

    _JSON_TO_FIELD = {"lambda": "lambda_"}
    _FIELD_TO_JSON = {"lambda_": "lambda"}

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        values = {}
        for key, value in raw.items():
            field = cls._JSON_TO_FIELD.get(key, key)
            if field in MANIFEST_EXTRAS:
                continue
            if field not in known or field.startswith("_"):
                raise ConfigError(f"unknown config field {key!r}")
            values[field] = value
        return cls(**values)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            out[self._FIELD_TO_JSON.get(f.name, f.name)] = getattr(self, f.name)
        return out

    def validate(self, need_embeddings: bool = True, need_source: bool | None = None) -> None:
        """Field-level validation; raises ConfigError naming the field."""
        if not self.target_corpus:
            raise ConfigError("target_corpus is required")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {sorted(STRATEGIES)}, got {self.strategy!r}")
        if need_embeddings and not self.embeddings:
            raise ConfigError("embeddings is required")
        if need_source is None:
            need_source = self.strategy != "base"
        if need_source and not self.source_corpus:
            raise ConfigError(f"source_corpus is required for strategy {self.strategy!r}")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lambda_}")
        if self.lambda_applies_to not in LAMBDA_SIDES:
            raise ConfigError(f"lambda_applies_to must be one of {sorted(LAMBDA_SIDES)}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.checkpoint_metric not in CHECKPOINT_METRICS:
            raise ConfigError(f"checkpoint_metric must be one of {sorted(CHECKPOINT_METRICS)}")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ConfigError(f"keep_fraction must be in (0, 1], got {self.keep_fraction}")
        if self.iss_text not in SENTENCE_PARTS:
            raise ConfigError(f"iss_text must be one of {sorted(SENTENCE_PARTS)}")
        if self.lambda_grid is not None and not self.lambda_grid:
            raise ConfigError("lambda_grid must be non-empty when given")


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a JSON config file and apply CLI overrides (flags win)."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    return ExperimentConfig.from_dict(merged)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(doc, path) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _load_inputs(config: ExperimentConfig):
    target = load_corpus(config.target_corpus, Path(config.target_corpus).stem)
    target = Corpus(name=target.name, splits=target.splits, role="target")
    source = None
    if config.source_corpus:
        source = load_corpus(config.source_corpus, Path(config.source_corpus).stem)
        source = Corpus(name=source.name, splits=source.splits, role="source")
    table = load_embeddings(config.embeddings)
    return target, source, table


def _estimator_for(config: ExperimentConfig, table):
    common = dict(
        table=table,
        dims=config.dims,
        learning_rate=config.learning_rate,
        epochs=config.epochs,
        batch_size=config.batch_size,
        seed=config.seed,
        checkpoint_metric=config.checkpoint_metric,
        freeze_lower_layers=config.freeze_lower_layers,
    )
    if config.strategy == "init":
        common.update(
            source_epochs=config.source_epochs,
            source_learning_rate=config.source_learning_rate,
            source_seed=config.source_seed,
        )
    elif config.strategy in ("mult", "iss-mult"):
        common.update(lambda_=config.lambda_, lambda_applies_to=config.lambda_applies_to)
    if config.strategy == "iss-mult":
        common.update(
            n_clusters=config.k,
            keep_fraction=config.keep_fraction,
            similarity_text=config.iss_text,
        )
    return STRATEGIES[config.strategy](**common)


def _manifest(config: ExperimentConfig) -> dict:
    checksums = {"target_corpus": _sha256(config.target_corpus), "embeddings": _sha256(config.embeddings)}
    if config.source_corpus:
        checksums["source_corpus"] = _sha256(config.source_corpus)
    return {**config.to_dict(), "corpus_checksums": checksums, "package_version": __version__}


def run(config: ExperimentConfig) -> dict[str, Path]:
    """Run one experiment end to end and write all artifacts.

    Returns a name -> path map for checkpoint, progress log, dev and test
    EvalReports, and the manifest.
    """
    config.validate()
    target, source, table = _load_inputs(config)
    ranker = _estimator_for(config, table)
    ranker.fit(target, source)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {name: out_dir / name for name in ARTIFACTS}

    save_checkpoint(ranker.params_, ranker.dims_, paths["checkpoint.json"])
    model = ranker.model_
    progress_lines = [
        json.dumps({"epoch": i + 1, "train_loss": loss, "dev_metric": metric}, sort_keys=True)
        for i, (loss, metric) in enumerate(zip(model.train_loss_history, model.dev_history))
    ]
    paths["progress.jsonl"].write_text("\n".join(progress_lines) + "\n", encoding="utf-8")

    grid = tuple(config.threshold_grid) if config.threshold_grid else DEFAULT_THRESHOLD_GRID
    dev_report = evaluate_groups(ranker.score_groups(target, "dev"), threshold_grid=grid)
    # Test triggering reuses the dev-selected threshold; 0.5 is the fallback
    # when dev had no positive groups to select on.
    test_threshold = dev_report.threshold if dev_report.threshold is not None else 0.5
    test_report = evaluate_groups(
        ranker.score_groups(target, "test"), threshold=test_threshold, threshold_grid=grid
    )
    _write_json(dev_report.to_dict(), paths["eval_dev.json"])
    _write_json(test_report.to_dict(), paths["eval_test.json"])
    _write_json(_manifest(config), paths["manifest.json"])
    return paths


def run_lambda_search(config: ExperimentConfig) -> tuple[float, tuple[tuple[float, float], ...]]:
    """Grid-search the mixing weight per the config; honors XFERQA_THREADS."""
    config.validate(need_source=True)
    target, source, table = _load_inputs(config)
    dims = resolve_dims(config.dims, table.dim)
    cfg = TrainConfig(
        lambda_=config.lambda_,
        lambda_applies_to=config.lambda_applies_to,
        learning_rate=config.learning_rate,
        epochs=config.epochs,
        batch_size=config.batch_size,
        seed=config.seed,
        checkpoint_metric=config.checkpoint_metric,
        freeze_lower_layers=config.freeze_lower_layers,
    )
    grid = tuple(config.lambda_grid) if config.lambda_grid else DEFAULT_LAMBDA_GRID
    workers = max(1, int(os.environ.get("XFERQA_THREADS", "1")))
    return search_lambda(source, target, table, dims, cfg, grid, workers=workers)


def run_cluster_audit(config: ExperimentConfig, out_dir) -> dict:
    """Cluster the target dev set, filter the source, dump the audit TSV."""
    config.validate(need_source=True)
    target, source, table = _load_inputs(config)
    filtered, clusters, decision = cluster_and_filter(
        source, target, table, config.k, config.keep_fraction, config.iss_text
    )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    audit_path = out_dir / "filter_audit.tsv"
    write_filter_audit(decision, audit_path)
    sizes = [clusters.assignments.count(c) for c in range(clusters.k)]
    return {
        "k": clusters.k,
        "cluster_sizes": sizes,
        "n_source_train": len(decision.keep_mask),
        "kept": sum(decision.keep_mask),
        "realized_keep_fraction": decision.keep_fraction,
        "audit_path": audit_path,
    }


def ingest_stats(corpus: Corpus) -> list[str]:
    """Human-readable per-split summary lines for ingest-check."""
    lines = []
    for split, groups in corpus.splits.items():
        n_instances = sum(len(g.candidates) for g in groups)
        lines.append(
            f"{corpus.name} {split}: {len(groups)} questions, {n_instances} candidates, "
            f"hit rate {hit_rate(corpus, split):.4f}"
        )
    return lines


def _fmt_cell(value: float | None) -> str:
    return "-" if value is None else f"{100.0 * value:.2f}"


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows)


def report(results_dirs) -> tuple[str, str]:
    """Cross-experiment grid: rows = trained-on source, columns = MAP/MRR/F1.

    Returns (aligned text table, TSV). Every cell comes straight from one
    EvalReport field; the only render-time computation is rounding. All
    result dirs must share the same target corpus.
    """
    dirs = [Path(d) for d in results_dirs]
    if not dirs:
        raise ConfigError("report needs at least one results directory")
    rows = []
    target_name = None
    for d in dirs:
        manifest_path = d / "manifest.json"
        eval_path = d / "eval_test.json"
        if not manifest_path.exists() or not eval_path.exists():
            raise DataError(f"{d}: missing manifest.json or eval_test.json")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        rep = EvalReport.from_dict(json.loads(eval_path.read_text(encoding="utf-8")))
        this_target = Path(manifest["target_corpus"]).stem
        if target_name is None:
            target_name = this_target
        elif target_name != this_target:
            raise DataError(
                f"conflicting target corpora across dirs: {target_name!r} vs {this_target!r}"
            )
        trained_on = Path(manifest["source_corpus"]).stem if manifest.get("source_corpus") else "-"
        rows.append((trained_on, manifest["strategy"], rep))

    header = ["Trained On", "Strategy", "MAP", "MRR", "F1"]
    text_rows = [header, ["-" * len(h) for h in header]]
    tsv_lines = ["trained_on\tstrategy\ttarget\tmap\tmrr\tf1"]
    for trained_on, strategy, rep in rows:
        text_rows.append(
            [trained_on, strategy, _fmt_cell(rep.map_score), _fmt_cell(rep.mrr_score), _fmt_cell(rep.f1)]
        )
        tsv_cells = [trained_on, strategy, target_name] + [
            "-" if v is None else repr(v) for v in (rep.map_score, rep.mrr_score, rep.f1)
        ]
        tsv_lines.append("\t".join(tsv_cells))
    title = f"Evaluation on {target_name} (test)"
    text = title + "\n" + _align(text_rows) + "\n"
    return text, "\n".join(tsv_lines) + "\n"


def lambda_table(records, best_lambda: float) -> tuple[str, str]:
    """Render the grid-search output ascending by lambda, best row marked."""
    ordered = sorted(records, key=lambda rec: rec[0])
    text_rows = [["lambda", "dev metric", "best"], ["------", "----------", "----"]]
    tsv_lines = ["lambda\tdev_metric\tbest"]
    for lam, metric in ordered:
        mark = "*" if lam == best_lambda else ""
        text_rows.append([f"{lam:g}", f"{100.0 * metric:.2f}", mark])
        tsv_lines.append(f"{lam!r}\t{metric!r}\t{int(lam == best_lambda)}")
    return _align(text_rows) + "\n", "\n".join(tsv_lines) + "\n"
