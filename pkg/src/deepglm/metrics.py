"""Ranking and classification metrics for single-relevant-label tasks.

Each record has exactly one true label and a ranked list of at most k
distinct predictions.  The discounted gain of a record is 1/log2(pos + 1)
for the 1-based position of the true label inside the list and 0 when it
is absent, so the ideal gain is always 1 and the mean gain is already
normalized to [0, 1].
"""

from __future__ import annotations

import math

import numpy as np


def dcg_at_k(true_label, ranked, k: int = 5) -> float:
    """Positional gain of one ranked list against its true label."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = [str(r) for r in ranked[:k]]
    if len(set(ranked)) != len(ranked):
        raise ValueError("ranked list contains duplicate labels")
    true_label = str(true_label)
    for pos, label in enumerate(ranked, start=1):
        if label == true_label:
            return 1.0 / math.log2(pos + 1)
    return 0.0


def ndcg(truths, predictions, k: int = 5) -> float:
    """Mean positional gain over records (ideal gain is 1 per record)."""
    truths = list(truths)
    predictions = list(predictions)
    if len(truths) != len(predictions):
        raise ValueError("need one ranked list per true label")
    if not truths:
        raise ValueError("need at least one record")
    return float(np.mean([dcg_at_k(t, p, k) for t, p in zip(truths, predictions)]))


def topk_accuracy(truths, predictions, k: int):
    """Fraction of records whose true label appears in the top k.

    Returns {"overall": float, "per_class": {label: float}}.
    """
    truths = [str(t) for t in truths]
    predictions = list(predictions)
    if len(truths) != len(predictions):
        raise ValueError("need one ranked list per true label")
    hits = {}
    totals = {}
    overall = 0
    for t, ranked in zip(truths, predictions):
        ranked = [str(r) for r in ranked[:k]]
        if len(set(ranked)) != len(ranked):
            raise ValueError("ranked list contains duplicate labels")
        hit = t in ranked
        overall += hit
        totals[t] = totals.get(t, 0) + 1
        hits[t] = hits.get(t, 0) + hit
    return {
        "overall": overall / len(truths),
        "per_class": {lab: hits[lab] / totals[lab] for lab in sorted(totals)},
    }


def expected_random_ndcg(n_classes: int, k: int = 5) -> float:
    """Exact mean gain of a uniform-random ranker.

    The true label is equally likely to land at each of the n_classes
    positions; positions beyond k score 0.
    """
    if n_classes < 1:
        raise ValueError("need at least one class")
    gains = [1.0 / math.log2(j + 1) for j in range(1, min(k, n_classes) + 1)]
    return sum(gains) / n_classes


def rank_columns(prob_matrix, labels, k: int = 5):
    """Top-k label lists from a class-probability matrix (classes x records).

    Ties are broken toward the earlier label to keep rankings deterministic.
    """
    P = np.asarray(prob_matrix, dtype=np.float64)
    if P.shape[0] != len(labels):
        raise ValueError("need one probability row per label")
    # stable sort on negated probabilities: equal scores keep label order
    order = np.argsort(-P, axis=0, kind="stable")
    return [[labels[order[j, i]] for j in range(min(k, len(labels)))]
            for i in range(P.shape[1])]
