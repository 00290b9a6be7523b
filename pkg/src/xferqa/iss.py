"""Intelligent sample selection for transfer training.

The target dev set is clustered bottom-up under cosine similarity with
average linkage; the cluster centers (member means) then act as
representatives of the target, and only the source train samples most
similar to some center are kept for joint training. Clustering never
touches the target train or test splits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Corpus, QuestionGroup
from .embeddings import EmbeddingTable, sentence_vector
from .errors import DataError
from .model import ModelDims
from .train import TrainConfig, TrainedModel, train_mult
from .validation import as_vector

DEFAULT_KEEP_FRACTION = 0.8


def cosine_similarity(u, v) -> float:
    """u . v / (|u| |v|); raises DataError on a zero vector."""
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    if u.shape != v.shape:
        raise ValueError(f"vectors have different lengths {u.size} and {v.size}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DataError("cosine similarity is undefined for a zero vector")
    return float(u @ v / (nu * nv))


@dataclass(frozen=True)
class ClusterSet:
    """A flat clustering: per-sample assignments plus member-mean centers."""

    assignments: tuple[int, ...]
    centers: tuple[np.ndarray, ...]
    k: int
    merge_similarities: tuple[float, ...] = ()


def agglomerative_cluster(vectors: Sequence, k: int) -> ClusterSet:
    """Merge singletons bottom-up until k clusters remain.

    At each step the pair of clusters with the highest average pairwise
    cosine similarity between members is merged, ties broken by the
    smallest (i, j) position pair; centers are arithmetic member means.
    """
    vs = [as_vector(v, f"vectors[{i}]") for i, v in enumerate(vectors)]
    n = len(vs)
    if n == 0:
        raise ValueError("no vectors to cluster")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")

    matrix = np.vstack(vs)
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        raise DataError("cosine similarity is undefined for a zero vector")
    unit = matrix / norms[:, None]
    sims = unit @ unit.T

    members: list[list[int]] = [[i] for i in range(n)]
    # link[i][j] = average pairwise similarity between members of clusters i and j
    link = sims.copy()
    merge_log: list[float] = []
    while len(members) > k:
        m = len(members)
        # argmax over the strict upper triangle; row-major order makes ties
        # resolve to the smallest (i, j) position pair
        masked = np.where(np.triu(np.ones((m, m), dtype=bool), 1), link, -np.inf)
        i, j = np.unravel_index(int(np.argmax(masked)), masked.shape)
        merge_log.append(float(link[i, j]))
        size_i, size_j = len(members[i]), len(members[j])
        # Average-linkage update: merged-to-c similarity is the size-weighted mean.
        merged_row = (size_i * link[i] + size_j * link[j]) / (size_i + size_j)
        link[i] = merged_row
        link[:, i] = merged_row
        members[i] = members[i] + members[j]
        keep = [c for c in range(m) if c != j]
        link = link[np.ix_(keep, keep)]
        del members[j]

    assignments = [0] * n
    for cluster_id, idxs in enumerate(members):
        for idx in idxs:
            assignments[idx] = cluster_id
    centers = tuple(np.mean([vs[i] for i in idxs], axis=0) for idxs in members)
    return ClusterSet(tuple(assignments), centers, len(members), tuple(merge_log))


@dataclass(frozen=True)
class FilterDecision:
    """Keep/drop verdict per source train sample, with its center similarity."""

    keep_mask: tuple[bool, ...]
    similarity: tuple[float, ...]
    keep_fraction: float


def select_source(
    source: Corpus,
    centers: Sequence,
    table: EmbeddingTable,
    keep_fraction: float = DEFAULT_KEEP_FRACTION,
    parts: str = "pair",
) -> tuple[Corpus, FilterDecision]:
    """Keep the source train samples most similar to any cluster center.

    similarity[i] is the max cosine similarity of sample i's pooled vector
    to any center; the ceil(keep_fraction * n) most similar samples are
    kept, with ties at the realized threshold all kept. Dev and test
    splits pass through untouched.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    centers = [as_vector(c, f"centers[{i}]") for i, c in enumerate(centers)]
    if not centers:
        raise ValueError("centers is empty")
    train_groups = source.groups("train")
    flat = [(gi, ci, cand) for gi, g in enumerate(train_groups) for ci, cand in enumerate(g.candidates)]
    sims = np.array(
        [
            max(cosine_similarity(sentence_vector(cand, table, parts), center) for center in centers)
            for _, _, cand in flat
        ]
    )
    n = len(flat)
    n_keep = math.ceil(keep_fraction * n)
    ranked = sorted(range(n), key=lambda i: (-sims[i], i))
    threshold = sims[ranked[n_keep - 1]]
    keep_mask = sims >= threshold

    kept_per_group: dict[int, list] = {}
    for (gi, ci, cand), keep in zip(flat, keep_mask):
        if keep:
            kept_per_group.setdefault(gi, []).append(cand)
    new_train = tuple(
        QuestionGroup(train_groups[gi].question_id, tuple(kept_per_group[gi]))
        for gi in range(len(train_groups))
        if gi in kept_per_group
    )
    splits = dict(source.splits)
    splits["train"] = new_train
    filtered = Corpus(name=source.name, splits=splits, role=source.role)
    decision = FilterDecision(
        keep_mask=tuple(bool(b) for b in keep_mask),
        similarity=tuple(float(s) for s in sims),
        keep_fraction=float(keep_mask.mean()),
    )
    return filtered, decision


def default_cluster_count(n_dev: int) -> int:
    """Square-root heuristic: ceil(sqrt(n))."""
    return max(1, math.isqrt(max(n_dev - 1, 0)) + 1)


def cluster_and_filter(
    source: Corpus,
    target: Corpus,
    table: EmbeddingTable,
    k: int | None = None,
    keep_fraction: float = DEFAULT_KEEP_FRACTION,
    parts: str = "pair",
) -> tuple[Corpus, ClusterSet, FilterDecision]:
    """Cluster the target dev instances, then filter the source train split."""
    dev_instances = target.instances("dev")
    vectors = [sentence_vector(inst, table, parts) for inst in dev_instances]
    if k is None:
        k = default_cluster_count(len(vectors))
    clusters = agglomerative_cluster(vectors, k)
    filtered, decision = select_source(source, clusters.centers, table, keep_fraction, parts)
    return filtered, clusters, decision


def train_iss_mult(
    source: Corpus,
    target: Corpus,
    table: EmbeddingTable,
    dims: ModelDims,
    cfg: TrainConfig,
    k: int | None = None,
    keep_fraction: float = DEFAULT_KEEP_FRACTION,
    parts: str = "pair",
) -> TrainedModel:
    """Joint training on the center-filtered source; keep_fraction = 1.0
    reduces to train_mult exactly."""
    filtered, _, _ = cluster_and_filter(source, target, table, k, keep_fraction, parts)
    return train_mult(filtered, target, table, dims, cfg)


def write_filter_audit(decision: FilterDecision, path) -> None:
    """Dump the decision as TSV: sample_index, similarity, kept."""
    lines = ["sample_index\tsimilarity\tkept"]
    for i, (sim, kept) in enumerate(zip(decision.similarity, decision.keep_mask)):
        lines.append(f"{i}\t{sim!r}\t{int(kept)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
