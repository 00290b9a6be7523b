"""Transfer-learning toolkit for question-answering sentence-pair ranking.

Corpora of labelled question-candidate pairs are scored by a small
gradient-checked bigram CNN; knowledge moves from a source corpus to a
target corpus by weight initialization (init), probabilistic joint
sampling (mult), or joint sampling over a similarity-filtered source
(iss-mult). Evaluation covers answer selection (MAP/MRR) and answer
triggering (thresholded F1).
"""

__version__ = "0.1.0"

from .corpus import Corpus, QAInstance, QuestionGroup, hit_rate, load_corpus, save_corpus, synth_corpus, tokenize
from .embeddings import (
    EmbeddingTable,
    SentenceMatrix,
    embed_sentence,
    load_embeddings,
    save_embeddings,
    sentence_vector,
)
from .errors import ConfigError, DataError, NumericError, XferqaError
from .estimators import BaselineRanker, CosineAgglomerative, InitRanker, IssMultRanker, MultRanker
from .iss import (
    ClusterSet,
    FilterDecision,
    agglomerative_cluster,
    cluster_and_filter,
    cosine_similarity,
    select_source,
    train_iss_mult,
)
from .metrics import (
    EvalReport,
    ScoredGroup,
    average_precision,
    evaluate_groups,
    map_mrr,
    select_threshold,
    triggering_f1,
)
from .model import (
    Gradients,
    ModelDims,
    ModelParams,
    encode,
    init_params,
    load_checkpoint,
    loss_and_grad,
    save_checkpoint,
    score,
)
from .numkernel import GradCheckReport, finite_diff_check
from .train import (
    DEFAULT_LAMBDA_GRID,
    TrainConfig,
    TrainedModel,
    mixed_cost,
    search_lambda,
    train_base,
    train_init,
    train_mult,
)

__all__ = [
    "__version__",
    "Corpus", "QAInstance", "QuestionGroup", "hit_rate", "load_corpus", "save_corpus", "synth_corpus", "tokenize",
    "EmbeddingTable", "SentenceMatrix", "embed_sentence", "load_embeddings", "save_embeddings", "sentence_vector",
    "XferqaError", "ConfigError", "DataError", "NumericError",
    "BaselineRanker", "InitRanker", "MultRanker", "IssMultRanker", "CosineAgglomerative",
    "ClusterSet", "FilterDecision", "agglomerative_cluster", "cluster_and_filter", "cosine_similarity",
    "select_source", "train_iss_mult",
    "EvalReport", "ScoredGroup", "average_precision", "evaluate_groups", "map_mrr", "select_threshold",
    "triggering_f1",
    "Gradients", "ModelDims", "ModelParams", "encode", "init_params", "load_checkpoint", "loss_and_grad",
    "save_checkpoint", "score",
    "GradCheckReport", "finite_diff_check",
    "DEFAULT_LAMBDA_GRID", "TrainConfig", "TrainedModel", "mixed_cost", "search_lambda", "train_base",
    "train_init", "train_mult",
]
