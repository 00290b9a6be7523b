"""Ranking and triggering metrics.

Answer selection (every question has a correct candidate) is scored with
MAP and MRR over groups that contain a positive; answer triggering (a
question may have none) is scored with thresholded F1 over all groups,
where a prediction counts as correct only if the top-scored candidate is
itself a correct answer. Score ties are always broken by original
candidate order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DataError

DEFAULT_THRESHOLD_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))


@dataclass(frozen=True)
class ScoredGroup:
    """Candidate scores and gold labels for one question."""

    question_id: str
    scores: tuple[float, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.scores) != len(self.labels) or not self.scores:
            raise ValueError(f"group {self.question_id}: scores and labels must be equal length >= 1")
        if not all(math.isfinite(s) for s in self.scores):
            raise ValueError(f"group {self.question_id}: scores must be finite")
        if not all(l in (0, 1) for l in self.labels):
            raise ValueError(f"group {self.question_id}: labels must be 0 or 1")

    def has_positive(self) -> bool:
        return 1 in self.labels


@dataclass(frozen=True)
class EvalReport:
    """MAP/MRR/F1 results; fields are None when a task was not evaluated."""

    map_score: float | None = None
    mrr_score: float | None = None
    f1: float | None = None
    precision: float | None = None
    recall: float | None = None
    threshold: float | None = None
    n_questions_selection: int = 0
    n_questions_triggering: int = 0

    def to_dict(self) -> dict:
        return {
            "map_score": self.map_score,
            "mrr_score": self.mrr_score,
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "threshold": self.threshold,
            "n_questions_selection": self.n_questions_selection,
            "n_questions_triggering": self.n_questions_triggering,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**d)


def _ranked_labels(group: ScoredGroup) -> list[int]:
    order = sorted(range(len(group.scores)), key=lambda i: (-group.scores[i], i))
    return [group.labels[i] for i in order]


def average_precision(group: ScoredGroup) -> float:
    """Mean over positive ranks r of (positives at rank <= r) / r."""
    if not group.has_positive():
        raise DataError(f"group {group.question_id} has no positive candidate")
    hits = 0
    total = 0.0
    for rank, label in enumerate(_ranked_labels(group), start=1):
        if label == 1:
            hits += 1
            total += hits / rank
    return total / hits


def reciprocal_rank(group: ScoredGroup) -> float:
    """1 / rank of the first positive candidate."""
    for rank, label in enumerate(_ranked_labels(group), start=1):
        if label == 1:
            return 1.0 / rank
    raise DataError(f"group {group.question_id} has no positive candidate")


def map_mrr(groups: Iterable[ScoredGroup]) -> tuple[float, float]:
    """MAP and MRR over the groups that contain at least one positive.

    Positive-free groups are excluded, matching the answer-selection task
    definition; raises DataError when every group is positive-free.
    """
    kept = [g for g in groups if g.has_positive()]
    if not kept:
        raise DataError("no group contains a positive candidate; MAP/MRR undefined")
    mean_ap = sum(average_precision(g) for g in kept) / len(kept)
    mean_rr = sum(reciprocal_rank(g) for g in kept) / len(kept)
    return mean_ap, mean_rr


def triggering_f1(groups: Sequence[ScoredGroup], threshold: float) -> EvalReport:
    """Thresholded triggering F1 over all groups, positive-free ones included.

    A group is predicted answerable iff its max score >= threshold; the
    prediction is a true positive iff the top-scored candidate (earliest
    index on ties) is labelled correct.
    """
    groups = list(groups)
    if not groups:
        raise ValueError("no groups to evaluate")
    n_answerable = sum(1 for g in groups if g.has_positive())
    if n_answerable == 0:
        raise DataError("no group contains a positive candidate; recall undefined")
    tp = 0
    predicted = 0
    for g in groups:
        best = max(g.scores)
        if best >= threshold:
            predicted += 1
            top = g.scores.index(best)
            if g.labels[top] == 1:
                tp += 1
    precision = tp / predicted if predicted else 0.0
    recall = tp / n_answerable
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalReport(
        f1=f1,
        precision=precision,
        recall=recall,
        threshold=threshold,
        n_questions_selection=n_answerable,
        n_questions_triggering=len(groups),
    )


def threshold_curve(
    groups: Sequence[ScoredGroup], grid: Sequence[float] = DEFAULT_THRESHOLD_GRID
) -> tuple[tuple[float, float], ...]:
    """(threshold, F1) for every grid value, in grid order."""
    if not grid:
        raise ValueError("threshold grid is empty")
    return tuple((float(t), triggering_f1(groups, t).f1) for t in grid)


def select_threshold(
    dev_groups: Sequence[ScoredGroup], grid: Sequence[float] = DEFAULT_THRESHOLD_GRID
) -> float:
    """Grid value maximizing dev F1; ties go to the smaller threshold."""
    curve = threshold_curve(dev_groups, grid)
    return max(curve, key=lambda pair: (pair[1], -pair[0]))[0]


def evaluate_groups(
    groups: Sequence[ScoredGroup],
    threshold: float | None = None,
    threshold_grid: Sequence[float] = DEFAULT_THRESHOLD_GRID,
) -> EvalReport:
    """Full report over scored groups.

    MAP/MRR cover groups with a positive; triggering F1 covers all groups
    at the given threshold, or at the grid value maximizing F1 on these
    same groups when threshold is None (dev-style selection). Metrics that
    are undefined for the data (no positives anywhere) stay None.
    """
    groups = list(groups)
    if not groups:
        raise ValueError("no groups to evaluate")
    n_answerable = sum(1 for g in groups if g.has_positive())
    if n_answerable == 0:
        return EvalReport(n_questions_selection=0, n_questions_triggering=len(groups))
    map_score, mrr_score = map_mrr(groups)
    used = select_threshold(groups, threshold_grid) if threshold is None else float(threshold)
    trig = triggering_f1(groups, used)
    return EvalReport(
        map_score=map_score,
        mrr_score=mrr_score,
        f1=trig.f1,
        precision=trig.precision,
        recall=trig.recall,
        threshold=used,
        n_questions_selection=n_answerable,
        n_questions_triggering=len(groups),
    )
