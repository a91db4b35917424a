"""Evaluation metrics: exact-match accuracy and per-table hit rate at k."""

from __future__ import annotations

import logging
from typing import Sequence

from fieldmeta.errors import EmptyEvaluation

logger = logging.getLogger(__name__)


def accuracy(preds: Sequence, golds: Sequence) -> float:
    """Exact-match fraction over labeled positions (gold None = unlabeled, skipped)."""
    if len(preds) != len(golds):
        raise EmptyEvaluation(
            f"misaligned evaluation: {len(preds)} predictions vs {len(golds)} golds"
        )
    hits = 0
    labeled = 0
    for pred, gold in zip(preds, golds):
        if gold is None:
            continue
        labeled += 1
        if pred == gold:
            hits += 1
    if labeled == 0:
        raise EmptyEvaluation("no labeled samples to evaluate")
    return hits / labeled


def hit_rate_detail(
    rankings: Sequence[Sequence[int]],
    positives: Sequence[set[int]],
    k: int,
) -> tuple[float, int, int]:
    """(HR@k, tables evaluated, tables excluded for having no positives)."""
    if len(rankings) != len(positives):
        raise EmptyEvaluation("rankings and positives differ in length")
    hits = 0
    used = 0
    excluded = 0
    for ranking, positive in zip(rankings, positives):
        if not positive:
            excluded += 1
            continue
        used += 1
        if set(ranking[:k]) & set(positive):
            hits += 1
    if excluded:
        logger.warning("hit_rate_at_k: excluded %d tables without positives", excluded)
    if used == 0:
        raise EmptyEvaluation("no tables with positives")
    return hits / used, used, excluded


def hit_rate_at_k(
    rankings: Sequence[Sequence[int]],
    positives: Sequence[set[int]],
    k: int,
) -> float:
    """Fraction of tables whose top-k ranked fields contain a gold positive."""
    value, _, _ = hit_rate_detail(rankings, positives, k)
    return value
