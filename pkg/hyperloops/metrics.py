from __future__ import annotations

import typing as t

import numpy as np

from scipy.stats import rankdata
from sklearn.model_selection import StratifiedKFold

from .exceptions import EmptyScoreList, InsufficientData, MetricError, RankTooLarge


def auc(pos_scores: t.Sequence[float], neg_scores: t.Sequence[float]) -> float:
    """
    Area under the ROC curve in its Mann-Whitney form: the probability that a
    random positive outscores a random negative, ties counting one half.
    Computed exactly from ranks.
    """
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if not pos.size or not neg.size:
        raise EmptyScoreList("auc needs at least one positive and one negative score")

    # average ranks are multiples of 1/2, so doubling keeps everything integral
    ranks2 = (2 * rankdata(np.concatenate([pos, neg]))).astype(np.int64)
    u2 = int(ranks2[: pos.size].sum()) - pos.size * (pos.size + 1)
    return u2 / (2 * pos.size * neg.size)


def precision_at(
    pos_set: t.Collection[t.Hashable],
    ranked: t.Sequence[tuple[t.Hashable, float]],
    L: int | None = None,
) -> float:
    """
    Fraction of the top ``L`` scored candidates that are true missing hyperlinks.

    Candidates tied with the score at the cutoff share the remaining slots, each
    slot credited with the fraction of positives among the tied candidates.

    :param pos_set: Identities of the true missing hyperlinks.
    :param ranked: ``(identity, score)`` pairs, in any order.
    :param L: The cutoff; defaults to ``len(pos_set)``.
    """
    if L is None:
        L = len(pos_set)
    if L < 1:
        raise MetricError("L must be at least 1")
    if L > len(ranked):
        raise RankTooLarge(f"L={L} exceeds the {len(ranked)} ranked candidates")

    positives = set(pos_set)
    scores = np.array([score for _, score in ranked], dtype=np.float64)
    is_pos = np.array([key in positives for key, _ in ranked], dtype=bool)

    cutoff = np.sort(scores)[::-1][L - 1]
    above = scores > cutoff
    tied = scores == cutoff
    slots = L - int(above.sum())
    ties_total = int(tied.sum())
    credit = int(is_pos[above].sum()) * ties_total + slots * int(is_pos[tied].sum())
    return credit / (ties_total * L)


def evaluate_scores(
    pos_set: t.Collection[t.Hashable],
    scores: t.Mapping[t.Hashable, float],
    L: int | None = None,
) -> tuple[float, float]:
    """
    AUC and Precision of a score table against the true missing hyperlinks. Every
    scored identity not in ``pos_set`` is a negative.
    """
    positives = set(pos_set)
    pos = [s for key, s in scores.items() if key in positives]
    neg = [s for key, s in scores.items() if key not in positives]
    if L is None:
        L = len(pos)
    return auc(pos, neg), precision_at(positives, list(scores.items()), L)


def stratified_folds(
    labels: t.Sequence[int],
    folds: int,
    seed: int,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """
    ``(train, validation)`` index pairs for k-fold cross-validation, stratified by
    label and deterministic given ``seed``.
    """
    y = np.asarray(labels)
    if folds < 2:
        raise MetricError("folds must be at least 2")
    if len(y) < folds:
        raise InsufficientData(f"{len(y)} rows cannot be split into {folds} folds")
    _, counts = np.unique(y, return_counts=True)
    if len(counts) < 2 or counts.min() < folds:
        raise InsufficientData(f"Every label needs at least {folds} rows for {folds} folds")

    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    return list(splitter.split(np.zeros(len(y)), y))


__all__ = [
    "auc",
    "evaluate_scores",
    "precision_at",
    "stratified_folds",
]
