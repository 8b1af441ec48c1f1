"""Naive reference implementations used to cross-check the engine.

Deliberately simple and deliberately independent: nothing here imports
engine modules, shares kernels, or takes shortcuts.  A disagreement
with these is a bug in the engine, full stop.
"""
from __future__ import annotations

import numpy as np


def oracle_knn(
    vectors: np.ndarray,
    item_ids: np.ndarray,
    query: np.ndarray,
    k: int,
) -> list[tuple[int, float]]:
    """Exhaustive top-k by (dot score desc, item id asc).

    Scores via one float64 dot per row, ranking via python sort on a
    key tuple; returns [(item_id, score), ...].
    """
    query64 = np.asarray(query, dtype=np.float64)
    scored = []
    for row in range(vectors.shape[0]):
        score = float(np.dot(vectors[row].astype(np.float64), query64))
        scored.append((int(item_ids[row]), score))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[: min(k, len(scored))]


def oracle_sweep(
    scored: list[tuple[float, bool]],
) -> tuple[float, list[tuple[float, float, float, float]]]:
    """Exhaustive threshold sweep maximizing sensitivity + specificity - 1.

    Candidates are 0, the midpoints between consecutive distinct
    confidence values, and 1 + 1e-9.  Returns (theta_star, curve) where
    curve rows are (theta, sensitivity, specificity, j) in candidate
    order and theta_star is the smallest maximizer.
    """
    values = sorted(set(c for c, _ in scored))
    candidates = [0.0]
    for a, b in zip(values, values[1:]):
        candidates.append((a + b) / 2.0)
    candidates.append(1.0 + 1e-9)

    positives = [c for c, ok in scored if ok]
    negatives = [c for c, ok in scored if not ok]
    curve = []
    best_j = None
    theta_star = None
    for theta in candidates:
        sens = sum(1 for c in positives if c >= theta) / len(positives)
        spec = sum(1 for c in negatives if c < theta) / len(negatives)
        j = sens + spec - 1.0
        curve.append((theta, sens, spec, j))
        if best_j is None or j > best_j:
            best_j = j
            theta_star = theta
    return theta_star, curve


def oracle_count(
    ranked: list[list[int]],
    truths: list[int],
    ks: list[int],
    class_ids: list[int],
) -> dict:
    """Counting-based accuracy, per-class recall, macro recall and the
    top-1 confusion table, all from explicit loops."""
    n = len(truths)
    out: dict = {"topk": {}, "recall": {}, "macro_recall": {}, "n": n}
    truth_counts: dict[int, int] = {}
    for t in truths:
        truth_counts[t] = truth_counts.get(t, 0) + 1
    for k in ks:
        hits = 0
        per_class_hits: dict[int, int] = {}
        for labels, truth in zip(ranked, truths):
            if truth in labels[:k]:
                hits += 1
                per_class_hits[truth] = per_class_hits.get(truth, 0) + 1
        out["topk"][k] = hits / n
        recall = {
            c: per_class_hits.get(c, 0) / truth_counts[c]
            for c in sorted(truth_counts)
        }
        out["recall"][k] = recall
        out["macro_recall"][k] = sum(recall.values()) / len(recall)
    size = len(class_ids)
    index = {c: i for i, c in enumerate(sorted(class_ids))}
    confusion = [[0] * size for _ in range(size)]
    for labels, truth in zip(ranked, truths):
        confusion[index[truth]][index[labels[0]]] += 1
    out["confusion"] = confusion
    return out
