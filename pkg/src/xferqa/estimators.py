"""Scikit-learn style front end.

Each training strategy is an estimator: hyperparameters in the
constructor, corpora at fit time, fitted state in trailing-underscore
attributes, get_params/set_params inherited from BaseEstimator. The
clusterer follows the same convention over a plain sample matrix, so it
drops into pipelines that expect the fit/predict surface.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .corpus import Corpus
from .embeddings import EmbeddingTable, embed_sentence
from .iss import agglomerative_cluster, cluster_and_filter
from .metrics import DEFAULT_THRESHOLD_GRID, EvalReport, ScoredGroup, evaluate_groups, select_threshold
from .model import ModelDims, resolve_dims
from .model import score as score_pair
from .train import (
    TrainConfig,
    train_base,
    train_init,
    train_mult,
)
from .train import score_corpus_split
from .validation import as_matrix


class CosineAgglomerative(BaseEstimator):
    """Bottom-up clustering under average-linkage cosine similarity.

    Parameters
    ----------
    n_clusters : int, default=2
        Number of clusters to stop merging at.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
        Cluster id per input row.
    centers_ : ndarray of shape (n_clusters, n_features)
        Arithmetic mean of each cluster's members.
    """

    def __init__(self, n_clusters: int = 2):
        self.n_clusters = n_clusters

    def fit(self, X, y=None):
        X = as_matrix(X, "X")
        result = agglomerative_cluster(list(X), self.n_clusters)
        self.labels_ = np.array(result.assignments)
        self.centers_ = np.vstack(result.centers)
        self.cluster_set_ = result
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_


class _RankerBase(BaseEstimator):
    """Shared fit/predict plumbing for the strategy estimators."""

    def _resolved_dims(self) -> ModelDims:
        return resolve_dims(self.dims, self.table.dim)

    def _train_config(self, **overrides) -> TrainConfig:
        base = dict(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            checkpoint_metric=self.checkpoint_metric,
            freeze_lower_layers=self.freeze_lower_layers,
        )
        base.update(overrides)
        return TrainConfig(**base)

    def _finish_fit(self, model) -> "_RankerBase":
        self.model_ = model
        self.params_ = model.params
        self.best_epoch_ = model.best_epoch
        self.dev_history_ = model.dev_history
        return self

    def predict(self, X) -> np.ndarray:
        """Scores in (0, 1) for an iterable of (question_tokens, answer_tokens) pairs."""
        check_is_fitted(self, "model_")
        dims = self.dims_
        return np.array(
            [
                score_pair(
                    self.params_,
                    embed_sentence(q_tokens, self.table, dims.max_len),
                    embed_sentence(a_tokens, self.table, dims.max_len),
                )
                for q_tokens, a_tokens in X
            ]
        )

    def score_groups(self, corpus: Corpus, split: str) -> list[ScoredGroup]:
        check_is_fitted(self, "model_")
        return score_corpus_split(self.params_, corpus, split, self.table, self.dims_)

    def evaluate(self, corpus: Corpus, split: str, threshold: float | None = None) -> EvalReport:
        """EvalReport for one split; the triggering threshold defaults to the
        value selected on the corpus dev split."""
        check_is_fitted(self, "model_")
        if threshold is None and split != "dev":
            threshold = select_threshold(self.score_groups(corpus, "dev"), DEFAULT_THRESHOLD_GRID)
        return evaluate_groups(self.score_groups(corpus, split), threshold=threshold)


class BaselineRanker(_RankerBase):
    """Train on the target corpus alone.

    Parameters mirror the training config; `table` is the shared frozen
    embedding table and `dims` a ModelDims, preset name, or None for the
    desk filter geometry at the table's dimension.
    """

    def __init__(
        self,
        table: EmbeddingTable,
        dims=None,
        learning_rate: float = 0.05,
        epochs: int = 5,
        batch_size: int = 1,
        seed: int = 0,
        checkpoint_metric: str = "MAP",
        freeze_lower_layers: bool = False,
    ):
        self.table = table
        self.dims = dims
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.checkpoint_metric = checkpoint_metric
        self.freeze_lower_layers = freeze_lower_layers

    def fit(self, target: Corpus, source: Corpus | None = None):
        self.dims_ = self._resolved_dims()
        return self._finish_fit(train_base(target, self.table, self.dims_, self._train_config()))


class InitRanker(_RankerBase):
    """Pretrain on the source, fine-tune on the target from its best-dev weights.

    source_epochs / source_learning_rate / source_seed default to the
    target-phase values when None.
    """

    def __init__(
        self,
        table: EmbeddingTable,
        dims=None,
        learning_rate: float = 0.05,
        epochs: int = 5,
        batch_size: int = 1,
        seed: int = 0,
        checkpoint_metric: str = "MAP",
        freeze_lower_layers: bool = False,
        source_epochs: int | None = None,
        source_learning_rate: float | None = None,
        source_seed: int | None = None,
    ):
        self.table = table
        self.dims = dims
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.checkpoint_metric = checkpoint_metric
        self.freeze_lower_layers = freeze_lower_layers
        self.source_epochs = source_epochs
        self.source_learning_rate = source_learning_rate
        self.source_seed = source_seed

    def fit(self, target: Corpus, source: Corpus | None = None):
        if source is None:
            raise ValueError("InitRanker.fit requires a source corpus")
        self.dims_ = self._resolved_dims()
        cfg_tgt = self._train_config()
        cfg_src = self._train_config(
            epochs=self.source_epochs if self.source_epochs is not None else self.epochs,
            learning_rate=(
                self.source_learning_rate if self.source_learning_rate is not None else self.learning_rate
            ),
            seed=self.source_seed if self.source_seed is not None else self.seed,
            freeze_lower_layers=False,
        )
        return self._finish_fit(train_init(source, target, self.table, self.dims_, cfg_src, cfg_tgt))


class MultRanker(_RankerBase):
    """Joint training with Bernoulli(lambda) mixing of the two corpora."""

    def __init__(
        self,
        table: EmbeddingTable,
        dims=None,
        lambda_: float = 0.9,
        lambda_applies_to: str = "target",
        learning_rate: float = 0.05,
        epochs: int = 5,
        batch_size: int = 1,
        seed: int = 0,
        checkpoint_metric: str = "MAP",
        freeze_lower_layers: bool = False,
    ):
        self.table = table
        self.dims = dims
        self.lambda_ = lambda_
        self.lambda_applies_to = lambda_applies_to
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.checkpoint_metric = checkpoint_metric
        self.freeze_lower_layers = freeze_lower_layers

    def fit(self, target: Corpus, source: Corpus | None = None):
        if source is None:
            raise ValueError("MultRanker.fit requires a source corpus")
        self.dims_ = self._resolved_dims()
        cfg = self._train_config(lambda_=self.lambda_, lambda_applies_to=self.lambda_applies_to)
        return self._finish_fit(train_mult(source, target, self.table, self.dims_, cfg))


class IssMultRanker(_RankerBase):
    """MultRanker preceded by center-based filtering of the source train split."""

    def __init__(
        self,
        table: EmbeddingTable,
        dims=None,
        lambda_: float = 0.9,
        lambda_applies_to: str = "target",
        learning_rate: float = 0.05,
        epochs: int = 5,
        batch_size: int = 1,
        seed: int = 0,
        checkpoint_metric: str = "MAP",
        freeze_lower_layers: bool = False,
        n_clusters: int | None = None,
        keep_fraction: float = 0.8,
        similarity_text: str = "pair",
    ):
        self.table = table
        self.dims = dims
        self.lambda_ = lambda_
        self.lambda_applies_to = lambda_applies_to
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.checkpoint_metric = checkpoint_metric
        self.freeze_lower_layers = freeze_lower_layers
        self.n_clusters = n_clusters
        self.keep_fraction = keep_fraction
        self.similarity_text = similarity_text

    def fit(self, target: Corpus, source: Corpus | None = None):
        if source is None:
            raise ValueError("IssMultRanker.fit requires a source corpus")
        self.dims_ = self._resolved_dims()
        filtered, clusters, decision = cluster_and_filter(
            source, target, self.table, self.n_clusters, self.keep_fraction, self.similarity_text
        )
        self.cluster_set_ = clusters
        self.filter_decision_ = decision
        cfg = self._train_config(lambda_=self.lambda_, lambda_applies_to=self.lambda_applies_to)
        return self._finish_fit(train_mult(filtered, target, self.table, self.dims_, cfg))


STRATEGIES = {
    "base": BaselineRanker,
    "init": InitRanker,
    "mult": MultRanker,
    "iss-mult": IssMultRanker,
}
