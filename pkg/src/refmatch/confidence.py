"""Ensemble-consistency confidence, threshold calibration and triage.

Each ensemble pass re-scores the query against a masked copy of the
reference matrix; the fraction of passes agreeing with the modal top-1
is the confidence score.  The reliability threshold comes from
maximizing sensitivity + specificity - 1 over a sweep of candidate
cutoffs.
"""
from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, replace
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import kernels
from .core import Embedding, LibrarySnapshot
from .errors import (
    DimMismatch,
    EmptyCategory,
    EmptyLibrary,
    EnsembleDegenerate,
    NotNormalized,
    OneClassOnly,
    UnlabeledHit,
)
from .index import VectorIndex, search
from .kernels import rng

SENTINEL_HIGH = 1.0 + 1e-9


@dataclass(frozen=True)
class EnsembleSpec:
    """Pass count, mask rate and master seed for one ensemble run."""

    passes: int = 100
    mask_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.passes < 1:
            raise EnsembleDegenerate(f"passes must be >= 1, got {self.passes}")
        if not 0.0 <= self.mask_rate < 1.0:
            raise ValueError(f"mask_rate must be in [0, 1), got {self.mask_rate}")
        if not isinstance(self.seed, int):
            raise ValueError(f"seed must be an integer, got {type(self.seed)}")


@dataclass(frozen=True)
class ConfidenceReport:
    """Modal prediction plus its consistency across passes.

    reliable stays None until a threshold is applied; it means
    cscore >= theta afterwards.
    """

    final_class: int
    cscore: float
    per_pass_votes: dict[int, int]
    passes: int
    reliable: bool | None = None

    def with_threshold(self, theta: float) -> "ConfidenceReport":
        return replace(self, reliable=self.cscore >= theta)


def perturb(e: Embedding, p: float, pass_seed: int) -> Embedding:
    """Zero each coordinate with probability p, rescale survivors by
    1/(1-p), renormalize; p=0 returns the input unchanged."""
    if not isinstance(e, Embedding) or not e.normalized:
        raise NotNormalized("perturb requires a normalized Embedding")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"mask rate must be in [0, 1), got {p}")
    out = kernels.perturb_vector(e.values, pass_seed & rng.MASK64, p)
    return Embedding(out, normalized=True)


def _check_mc_inputs(query: Embedding, snapshot: LibrarySnapshot, k: int, n: int):
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if len(snapshot) == 0:
        raise EmptyLibrary("cannot run the ensemble over zero items")
    if bool((snapshot.class_ids < 0).any()):
        raise UnlabeledHit("snapshot contains unlabeled items")
    if not isinstance(query, Embedding) or not query.normalized:
        raise NotNormalized("query must be a normalized Embedding")
    if query.dim != snapshot.dim:
        raise DimMismatch(f"query dim {query.dim} != snapshot dim {snapshot.dim}")


def _vote_top1(class_ids: np.ndarray, scores: np.ndarray) -> int:
    """Top-1 of the similarity-weighted vote, ties to the smaller class."""
    weights: dict[int, float] = {}
    for cid, score in zip(class_ids, scores):
        c = int(cid)
        weights[c] = weights.get(c, 0.0) + max(float(score), 0.0)
    return min(weights.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def _report(votes: dict[int, int], passes: int) -> ConfidenceReport:
    if not votes:
        raise EnsembleDegenerate("no passes produced a vote")
    final_class = min(votes.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    return ConfidenceReport(
        final_class=final_class,
        cscore=votes[final_class] / passes,
        per_pass_votes=dict(sorted(votes.items())),
        passes=passes,
    )


def mc_predict(
    query: Embedding,
    snapshot: LibrarySnapshot,
    spec: EnsembleSpec,
    k: int = 30,
    n: int = 1,
) -> ConfidenceReport:
    """Consistency of the top-1 prediction across spec.passes masked
    re-scorings of the reference matrix.

    n is accepted for interface parity with predict; per-pass voting is
    over the single top label by design.
    """
    _check_mc_inputs(query, snapshot, k, n)
    votes: dict[int, int] = {}
    for t in range(1, spec.passes + 1):
        matrix = kernels.perturb_matrix(
            snapshot.vectors, snapshot.item_ids, spec.seed, t, spec.mask_rate
        )
        rows, scores = kernels.topk(matrix, snapshot.item_ids, query.values, k)
        top1 = _vote_top1(snapshot.class_ids[rows], scores)
        votes[top1] = votes.get(top1, 0) + 1
    return _report(votes, spec.passes)


def mc_predict_batch(
    queries: Sequence[Embedding],
    snapshot: LibrarySnapshot,
    spec: EnsembleSpec,
    k: int = 30,
) -> list[ConfidenceReport]:
    """mc_predict for every query, perturbing each pass's matrix once."""
    if not queries:
        return []
    for query in queries:
        _check_mc_inputs(query, snapshot, k, 1)
    stacked = np.stack([q.values for q in queries])
    votes: list[dict[int, int]] = [{} for _ in queries]
    for t in range(1, spec.passes + 1):
        matrix = kernels.perturb_matrix(
            snapshot.vectors, snapshot.item_ids, spec.seed, t, spec.mask_rate
        )
        rows, scores = kernels.batch_topk(matrix, snapshot.item_ids, stacked, k)
        for qi in range(len(queries)):
            top1 = _vote_top1(snapshot.class_ids[rows[qi]], scores[qi])
            votes[qi][top1] = votes[qi].get(top1, 0) + 1
    return [_report(v, spec.passes) for v in votes]


def mc_predict_from_passes(
    pass_queries: Sequence[Embedding],
    index: VectorIndex,
    k: int = 30,
) -> ConfidenceReport:
    """Ensemble-provider variant: callers with a real stochastic encoder
    supply one query embedding per pass; each is matched against the
    fixed index and votes are tallied the same way."""
    if not pass_queries:
        raise EnsembleDegenerate("no passes supplied")
    votes: dict[int, int] = {}
    for query in pass_queries:
        hits = search(index, query, k)
        class_ids = np.array(
            [-1 if h.class_id is None else h.class_id for h in hits], dtype=np.int64
        )
        if (class_ids < 0).any():
            raise UnlabeledHit("a pass hit an unlabeled item")
        scores = np.array([h.score for h in hits], dtype=np.float64)
        top1 = _vote_top1(class_ids, scores)
        votes[top1] = votes.get(top1, 0) + 1
    return _report(votes, len(pass_queries))


class CurvePoint(NamedTuple):
    theta: float
    sensitivity: float
    specificity: float
    j: float


@dataclass(frozen=True)
class CalibrationResult:
    """Youden sweep: curve over candidate thresholds and the smallest
    maximizer theta_star."""

    theta_star: float
    curve: tuple[CurvePoint, ...]
    positives: int
    negatives: int

    def to_json(self) -> dict:
        return {
            "theta_star": self.theta_star,
            "positives": self.positives,
            "negatives": self.negatives,
            "curve": [
                {
                    "theta": p.theta,
                    "sensitivity": p.sensitivity,
                    "specificity": p.specificity,
                    "j": p.j,
                }
                for p in self.curve
            ],
        }


def calibrate_threshold(
    scored: Sequence[tuple[float, bool]],
) -> CalibrationResult:
    """Sweep candidate thresholds for the best sensitivity/specificity
    trade-off.

    Candidates are 0, midpoints between consecutive distinct scores,
    and a sentinel just above 1; theta_star is the smallest candidate
    attaining the maximal J.
    """
    positives: list[float] = []
    negatives: list[float] = []
    for cscore, correct in scored:
        c = float(cscore)
        if not 0.0 <= c <= 1.0:
            raise ValueError(f"cscore {c} outside [0, 1]")
        (positives if correct else negatives).append(c)
    if not positives or not negatives:
        raise OneClassOnly(
            f"need both outcomes: {len(positives)} correct, "
            f"{len(negatives)} incorrect"
        )
    positives.sort()
    negatives.sort()

    distinct = sorted(set(positives) | set(negatives))
    candidates = [0.0]
    for a, b in zip(distinct, distinct[1:]):
        candidates.append((a + b) / 2.0)
    candidates.append(SENTINEL_HIGH)

    n_pos = len(positives)
    n_neg = len(negatives)
    curve: list[CurvePoint] = []
    best_j: float | None = None
    theta_star = 0.0
    for theta in candidates:
        sens = (n_pos - bisect_left(positives, theta)) / n_pos
        spec = bisect_left(negatives, theta) / n_neg
        j = sens + spec - 1.0
        curve.append(CurvePoint(theta, sens, spec, j))
        if best_j is None or j > best_j:
            best_j = j
            theta_star = theta
    return CalibrationResult(
        theta_star=theta_star,
        curve=tuple(curve),
        positives=n_pos,
        negatives=n_neg,
    )


@dataclass(frozen=True)
class TriageResult:
    retained: tuple[ConfidenceReport, ...]
    flagged: tuple[ConfidenceReport, ...]


def apply_threshold(
    reports: Sequence[ConfidenceReport], theta: float
) -> TriageResult:
    """Exact partition by cscore >= theta; reliable flags are filled in."""
    if not 0.0 <= theta <= SENTINEL_HIGH:
        raise ValueError(f"theta {theta} outside [0, {SENTINEL_HIGH}]")
    retained = []
    flagged = []
    for report in reports:
        stamped = report.with_threshold(theta)
        (retained if stamped.reliable else flagged).append(stamped)
    return TriageResult(retained=tuple(retained), flagged=tuple(flagged))


def ood_detection_rate(
    groups: Mapping[str, Sequence[ConfidenceReport]], theta: float
) -> dict[str, float]:
    """Fraction flagged (cscore < theta) per category."""
    rates: dict[str, float] = {}
    for category, reports in groups.items():
        if not reports:
            raise EmptyCategory(f"category {category!r} has no reports")
        flagged = sum(1 for r in reports if r.cscore < theta)
        rates[category] = flagged / len(reports)
    return rates
