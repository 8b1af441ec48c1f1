"""Label aggregation over ranked hits and the evaluation metric family."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import Embedding, LabelCatalog
from .errors import (
    EmptyEvaluation,
    EmptyHits,
    LengthMismatch,
    UnknownClassId,
    UnlabeledHit,
)
from .index import RankedHits, VectorIndex, batch_search, search


class LabelScore(NamedTuple):
    class_id: int
    score: float


@dataclass(frozen=True)
class Prediction:
    """Top-n classes by similarity-weighted vote."""

    ranked_labels: tuple[LabelScore, ...]
    neighbors_used: int

    @property
    def top1(self) -> int:
        return self.ranked_labels[0].class_id

    def labels(self) -> list[int]:
        return [ls.class_id for ls in self.ranked_labels]


def aggregate_labels(hits: RankedHits, n: int) -> Prediction:
    """Sum clamped-nonnegative scores per class, keep the best n.

    Ties rank the smaller class id first.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if len(hits) == 0:
        raise EmptyHits("cannot aggregate zero hits")
    weights: dict[int, float] = {}
    for hit in hits:
        if hit.class_id is None:
            raise UnlabeledHit(
                f"item {hit.item_id} is unlabeled", {"item_id": hit.item_id}
            )
        weights[hit.class_id] = weights.get(hit.class_id, 0.0) + max(hit.score, 0.0)
    ranked = sorted(weights.items(), key=lambda kv: (-kv[1], kv[0]))[:n]
    return Prediction(
        ranked_labels=tuple(LabelScore(c, s) for c, s in ranked),
        neighbors_used=len(hits),
    )


def predict(
    query: Embedding,
    index: VectorIndex,
    k: int = 30,
    n: int = 5,
    parallel: bool = False,
) -> Prediction:
    """aggregate_labels over the k nearest references."""
    return aggregate_labels(search(index, query, k, parallel=parallel), n)


def predict_batch(
    queries: Sequence[Embedding],
    index: VectorIndex,
    k: int = 30,
    n: int = 5,
) -> list[Prediction]:
    """predict for every query; any per-query error aborts the batch."""
    out: list[Prediction] = []
    for result in batch_search(index, queries, k):
        if isinstance(result, Exception):
            raise result
        out.append(aggregate_labels(result, n))
    return out


@dataclass(frozen=True)
class MetricsReport:
    """Top-k accuracy family plus the top-1 confusion table.

    confusion_top1 is indexed by class id on both axes (catalog ids are
    contiguous 0..C-1), rows = truth, columns = predicted.
    """

    top_k_accuracy: dict[int, float]
    per_class_recall: dict[int, dict[int, float]]
    macro_recall: dict[int, float]
    n_samples: int
    confusion_top1: np.ndarray

    def to_json(self) -> dict:
        return {
            "topk": {str(k): v for k, v in self.top_k_accuracy.items()},
            "recall": {
                str(k): {str(c): r for c, r in recalls.items()}
                for k, recalls in self.per_class_recall.items()
            },
            "macro_recall": {str(k): v for k, v in self.macro_recall.items()},
            "confusion": self.confusion_top1.tolist(),
            "n": self.n_samples,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "MetricsReport":
        return cls(
            top_k_accuracy={int(k): float(v) for k, v in payload["topk"].items()},
            per_class_recall={
                int(k): {int(c): float(r) for c, r in recalls.items()}
                for k, recalls in payload["recall"].items()
            },
            macro_recall={
                int(k): float(v) for k, v in payload["macro_recall"].items()
            },
            n_samples=int(payload["n"]),
            confusion_top1=np.asarray(payload["confusion"], dtype=np.int64),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def evaluate(
    predictions: Sequence[Prediction],
    truths: Sequence[int],
    ks: Sequence[int],
    catalog: LabelCatalog,
) -> MetricsReport:
    """Count top-k hits against truth labels.

    per_class_recall covers classes with at least one truth sample;
    macro recall is their unweighted mean.
    """
    if len(predictions) != len(truths):
        raise LengthMismatch(
            f"{len(predictions)} predictions vs {len(truths)} truths"
        )
    if not predictions:
        raise EmptyEvaluation("nothing to evaluate")
    n_classes = len(catalog)
    ks = sorted(set(int(k) for k in ks))
    for k in ks:
        if not 1 <= k <= n_classes:
            raise ValueError(f"k={k} outside 1..{n_classes}")
    for truth in truths:
        if truth not in catalog:
            raise UnknownClassId(f"truth label {truth} not in catalog")

    truth_counts: dict[int, int] = {}
    for truth in truths:
        truth_counts[truth] = truth_counts.get(truth, 0) + 1

    top_k_accuracy: dict[int, float] = {}
    per_class_recall: dict[int, dict[int, float]] = {}
    macro_recall: dict[int, float] = {}
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for pred, truth in zip(predictions, truths):
        confusion[truth, pred.top1] += 1
    for k in ks:
        hits_total = 0
        class_hits: dict[int, int] = {}
        for pred, truth in zip(predictions, truths):
            if truth in pred.labels()[:k]:
                hits_total += 1
                class_hits[truth] = class_hits.get(truth, 0) + 1
        top_k_accuracy[k] = hits_total / len(truths)
        recalls = {
            c: class_hits.get(c, 0) / truth_counts[c] for c in sorted(truth_counts)
        }
        per_class_recall[k] = recalls
        macro_recall[k] = sum(recalls.values()) / len(recalls)
    return MetricsReport(
        top_k_accuracy=top_k_accuracy,
        per_class_recall=per_class_recall,
        macro_recall=macro_recall,
        n_samples=len(truths),
        confusion_top1=confusion,
    )
