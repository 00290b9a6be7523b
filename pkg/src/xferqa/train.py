"""Training strategies for the pair scorer.

Four entry points share one SGD loop: train_base (plain SGD on one
corpus), train_init (fit the source, then fine-tune its best-dev weights
on the target), train_mult (per step, a Bernoulli draw with success
probability lambda picks which corpus supplies the next sample), and
search_lambda (grid search over the mixing weight). Every stochastic
choice is derived from the config seed, so each strategy is a pure
function of its inputs.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, Sequence

from .corpus import Corpus
from .embeddings import EmbeddingTable, SentenceMatrix, embed_sentence
from .errors import NumericError
from .metrics import DEFAULT_THRESHOLD_GRID, ScoredGroup, map_mrr, select_threshold, triggering_f1
from .model import ModelDims, ModelParams, init_params, loss_and_grad, score
from .validation import check_choice, check_positive, check_unit_interval

DEFAULT_LAMBDA_GRID = (0.85, 0.875, 0.9, 0.925, 0.95, 0.975)

CHECKPOINT_METRICS = ("MAP", "F1")
LAMBDA_SIDES = ("source", "target")

# One sample as fed to loss_and_grad: question matrix, answer matrix, label, question id.
Pair = tuple[SentenceMatrix, SentenceMatrix, int, str]


@dataclass(frozen=True)
class TrainConfig:
    """Every training hyperparameter, including the mixing weight lambda.

    lambda_applies_to names the corpus whose samples are drawn with
    probability lambda_ during joint training; the default "target"
    follows the target-heavy reading of the mixing rule, while "source"
    keeps the literal source-weighted one.
    """

    lambda_: float = 0.9
    lambda_applies_to: str = "target"
    learning_rate: float = 0.05
    epochs: int = 5
    batch_size: int = 1
    seed: int = 0
    checkpoint_metric: str = "MAP"
    freeze_lower_layers: bool = False

    def __post_init__(self):
        check_unit_interval(self.lambda_, "lambda_")
        check_choice(self.lambda_applies_to, "lambda_applies_to", LAMBDA_SIDES)
        check_positive(self.learning_rate, "learning_rate")
        check_positive(self.epochs, "epochs")
        check_positive(self.batch_size, "batch_size")
        check_choice(self.checkpoint_metric, "checkpoint_metric", CHECKPOINT_METRICS)


@dataclass(frozen=True)
class TrainedModel:
    """Best-dev-epoch weights plus the training trace that produced them."""

    params: ModelParams
    best_epoch: int
    dev_history: tuple[float, ...]
    config_echo: TrainConfig
    train_loss_history: tuple[float, ...] = ()
    origin_counts: dict[str, int] | None = None


def prepare_pairs(corpus: Corpus, split: str, table: EmbeddingTable, dims: ModelDims) -> list[Pair]:
    """Embed a split once; each question matrix is shared by its candidates."""
    pairs: list[Pair] = []
    for group in corpus.groups(split):
        q_mat = embed_sentence(group.candidates[0].question_tokens, table, dims.max_len)
        for cand in group.candidates:
            a_mat = embed_sentence(cand.answer_tokens, table, dims.max_len)
            pairs.append((q_mat, a_mat, cand.label, cand.question_id))
    return pairs


def score_corpus_split(
    params: ModelParams, corpus: Corpus, split: str, table: EmbeddingTable, dims: ModelDims
) -> list[ScoredGroup]:
    """Score every candidate of a split, grouped per question."""
    out = []
    for group in corpus.groups(split):
        q_mat = embed_sentence(group.candidates[0].question_tokens, table, dims.max_len)
        scores = tuple(
            score(params, q_mat, embed_sentence(c.answer_tokens, table, dims.max_len))
            for c in group.candidates
        )
        out.append(ScoredGroup(group.question_id, scores, tuple(c.label for c in group.candidates)))
    return out


def _dev_metric(params: ModelParams, dev_groups, metric: str) -> float:
    scored = [
        ScoredGroup(qid, tuple(score(params, q_mat, a) for a in a_mats), labels)
        for qid, q_mat, a_mats, labels in dev_groups
    ]
    if metric == "MAP":
        return map_mrr(scored)[0]
    best = select_threshold(scored, DEFAULT_THRESHOLD_GRID)
    return triggering_f1(scored, best).f1


def _prepare_dev(corpus: Corpus, table: EmbeddingTable, dims: ModelDims):
    dev = []
    for group in corpus.groups("dev"):
        q_mat = embed_sentence(group.candidates[0].question_tokens, table, dims.max_len)
        a_mats = tuple(embed_sentence(c.answer_tokens, table, dims.max_len) for c in group.candidates)
        dev.append((group.question_id, q_mat, a_mats, tuple(c.label for c in group.candidates)))
    return dev


def _apply_sgd(params: ModelParams, grads, learning_rate: float, freeze_lower_layers: bool) -> None:
    params.lr_weights -= learning_rate * grads.lr_weights
    params.lr_bias -= learning_rate * grads.lr_bias
    if freeze_lower_layers:
        return
    params.conv1_filters -= learning_rate * grads.conv1_filters
    params.conv1_bias -= learning_rate * grads.conv1_bias
    params.conv2_filters -= learning_rate * grads.conv2_filters
    params.conv2_bias -= learning_rate * grads.conv2_bias


def _batch_sizes(n_samples: int, batch_size: int) -> list[int]:
    sizes = [batch_size] * (n_samples // batch_size)
    if n_samples % batch_size:
        sizes.append(n_samples % batch_size)
    return sizes


def _run_training(
    params: ModelParams,
    cfg: TrainConfig,
    dev_groups,
    epoch_batches: Callable[[int], Iterable[list[Pair]]],
) -> tuple[ModelParams, int, tuple[float, ...], tuple[float, ...]]:
    """Shared SGD loop: per-epoch batches, dev metric, best-epoch snapshot."""
    best_params = params.copy()
    best_metric = float("-inf")
    best_epoch = 0
    dev_history: list[float] = []
    loss_history: list[float] = []
    for epoch in range(1, cfg.epochs + 1):
        epoch_loss = 0.0
        n_batches = 0
        for step, batch in enumerate(epoch_batches(epoch), start=1):
            try:
                loss, grads = loss_and_grad(params, batch)
            except NumericError as exc:
                raise NumericError(f"training diverged at epoch {epoch}, step {step}: {exc}") from exc
            _apply_sgd(params, grads, cfg.learning_rate, cfg.freeze_lower_layers)
            epoch_loss += loss
            n_batches += 1
        loss_history.append(epoch_loss / n_batches)
        metric = _dev_metric(params, dev_groups, cfg.checkpoint_metric)
        dev_history.append(metric)
        if metric > best_metric:
            best_metric = metric
            best_epoch = epoch
            best_params = params.copy()
    return best_params, best_epoch, tuple(dev_history), tuple(loss_history)


def train_base(
    corpus: Corpus,
    table: EmbeddingTable,
    dims: ModelDims,
    cfg: TrainConfig,
    init: ModelParams | None = None,
) -> TrainedModel:
    """Plain SGD on the train split, checkpointing the best dev epoch.

    The train instances are reshuffled every epoch from one seeded stream;
    when init is given, training starts from a copy of those weights.
    """
    pairs = prepare_pairs(corpus, "train", table, dims)
    dev = _prepare_dev(corpus, table, dims)
    params = init.copy() if init is not None else init_params(dims, cfg.seed)
    shuffle_rng = random.Random(f"{cfg.seed}-samples")

    def epoch_batches(epoch: int) -> Iterator[list[Pair]]:
        order = list(range(len(pairs)))
        shuffle_rng.shuffle(order)
        for start in range(0, len(order), cfg.batch_size):
            yield [pairs[i] for i in order[start : start + cfg.batch_size]]

    best_params, best_epoch, dev_history, loss_history = _run_training(params, cfg, dev, epoch_batches)
    return TrainedModel(best_params, best_epoch, dev_history, cfg, loss_history)


def train_init(
    source: Corpus,
    target: Corpus,
    table: EmbeddingTable,
    dims: ModelDims,
    cfg_src: TrainConfig,
    cfg_tgt: TrainConfig,
) -> TrainedModel:
    """Fit the source corpus, then fine-tune its best-dev weights on the target.

    With cfg_tgt.freeze_lower_layers only the logistic output weights move
    during the target phase.
    """
    source_model = train_base(source, table, dims, cfg_src)
    return train_base(target, table, dims, cfg_tgt, init=source_model.params)


def mixed_cost(cost_s: float, cost_t: float, lambda_: float) -> float:
    """Combined cost: lambda * cost_s + (1 - lambda) * cost_t."""
    check_unit_interval(lambda_, "lambda_")
    return lambda_ * cost_s + (1.0 - lambda_) * cost_t


class _SampleStream:
    """Cyclic sample stream; reshuffles with its own seeded rng on each pass."""

    def __init__(self, pairs: Sequence[Pair], seed_key: str):
        self._pairs = pairs
        self._rng = random.Random(seed_key)
        self._order: list[int] = []
        self._pos = 0

    def take(self) -> Pair:
        if self._pos >= len(self._order):
            self._order = list(range(len(self._pairs)))
            self._rng.shuffle(self._order)
            self._pos = 0
        pair = self._pairs[self._order[self._pos]]
        self._pos += 1
        return pair


def train_mult(
    source: Corpus,
    target: Corpus,
    table: EmbeddingTable,
    dims: ModelDims,
    cfg: TrainConfig,
) -> TrainedModel:
    """Joint training on both corpora with Bernoulli(lambda) sample mixing.

    Each draw comes from the corpus named by cfg.lambda_applies_to with
    probability cfg.lambda_, else from the other corpus. An epoch is sized
    by the target train split, and dev evaluation and checkpointing use
    the target dev split only. With lambda_ = 1 on the target side the run
    is step-for-step identical to train_base on the target.
    """
    target_pairs = prepare_pairs(target, "train", table, dims)
    source_pairs = prepare_pairs(source, "train", table, dims)
    dev = _prepare_dev(target, table, dims)
    params = init_params(dims, cfg.seed)
    target_stream = _SampleStream(target_pairs, f"{cfg.seed}-samples")
    source_stream = _SampleStream(source_pairs, f"{cfg.seed}-source-samples")
    mix_rng = random.Random(f"{cfg.seed}-mix")
    if cfg.lambda_applies_to == "target":
        primary, secondary = target_stream, source_stream
    else:
        primary, secondary = source_stream, target_stream
    counts = {"target": 0, "source": 0}

    def draw() -> Pair:
        stream = primary if mix_rng.random() < cfg.lambda_ else secondary
        counts["target" if stream is target_stream else "source"] += 1
        return stream.take()

    def epoch_batches(epoch: int) -> Iterator[list[Pair]]:
        for size in _batch_sizes(len(target_pairs), cfg.batch_size):
            yield [draw() for _ in range(size)]

    best_params, best_epoch, dev_history, loss_history = _run_training(params, cfg, dev, epoch_batches)
    return TrainedModel(best_params, best_epoch, dev_history, cfg, loss_history, dict(counts))


def search_lambda(
    source: Corpus,
    target: Corpus,
    table: EmbeddingTable,
    dims: ModelDims,
    cfg: TrainConfig,
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    workers: int = 1,
) -> tuple[float, tuple[tuple[float, float], ...]]:
    """Brute-force search over the mixing weight.

    Runs train_mult per grid value from the same base seed and returns the
    value maximizing the checkpoint metric on target dev, ties broken
    toward the larger lambda, along with the full (lambda, metric) table.
    Grid cells are independent, so they may run on a bounded worker pool.
    """
    if not grid:
        raise ValueError("lambda grid is empty")
    for value in grid:
        check_unit_interval(value, "lambda grid value")

    def run_cell(value: float) -> tuple[float, float]:
        model = train_mult(source, target, table, dims, replace(cfg, lambda_=float(value)))
        return float(value), model.dev_history[model.best_epoch - 1]

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = tuple(pool.map(run_cell, grid))
    else:
        records = tuple(run_cell(v) for v in grid)
    best_lambda = max(records, key=lambda rec: (rec[1], rec[0]))[0]
    return best_lambda, records
