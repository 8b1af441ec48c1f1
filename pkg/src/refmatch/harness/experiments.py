"""Scripted experiments with declared bounds and JSON/CSV reports.

Each experiment is a pure function of its config (which includes the
seed); reports echo the config, the metric tables, and every acceptance
check with its bound and observed value. The parallel flag switches the
plain search phases to the chunked scan kernel; ensemble passes always
use the batch kernel. Either way the reported numbers are identical.
"""
from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass

import numpy as np

from ..augment import compare_before_after, merge
from ..confidence import (
    EnsembleSpec,
    apply_threshold,
    calibrate_threshold,
    mc_predict_batch,
    ood_detection_rate,
)
from ..core import (
    Embedding,
    LabelCatalog,
    LibrarySnapshot,
    Provenance,
    ReferenceItem,
    items_from_manifest,
    normalize,
)
from ..diagnosis import evaluate, predict, predict_batch
from ..errors import ConfigError, IoFailure, UnknownExperiment
from ..index import build_index
from ..retrieval import (
    ReviewQuery,
    ReviewSheet,
    build_case_store,
    retrieve_cases,
    topk_hit_rate,
)
from .clusters import (
    ClusterSpec,
    class_names,
    gen_clusters,
    place_centroids,
    sample_points,
)
from .oracles import oracle_count

RUNTIME_BUDGET_S = 60.0


@dataclass(frozen=True)
class Check:
    """One acceptance bound with what was actually observed."""

    name: str
    bound: str
    observed: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "bound": self.bound,
            "observed": self.observed,
            "passed": self.passed,
        }


def _ge(name: str, observed: float, bound: float) -> Check:
    return Check(name, f">= {bound}", float(observed), float(observed) >= bound)


def _le(name: str, observed: float, bound: float) -> Check:
    return Check(name, f"<= {bound}", float(observed), float(observed) <= bound)


def _lt(name: str, observed: float, bound: float) -> Check:
    return Check(name, f"< {bound}", float(observed), float(observed) < bound)


@dataclass(frozen=True)
class ExperimentReport:
    """Config echo, metric tables, bound checks and phase timings."""

    name: str
    config: dict
    metrics: dict
    checks: tuple[Check, ...]
    timings: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "config": dict(self.config),
            "metrics": self.metrics,
            "checks": [c.to_json() for c in self.checks],
            "timings": dict(self.timings),
        }

    def csv_rows(self) -> list[list]:
        rows: list[list] = [["section", "key", "value", "bound", "passed"]]

        def flatten(prefix: str, value):
            if isinstance(value, dict):
                for k, v in value.items():
                    flatten(f"{prefix}.{k}" if prefix else str(k), v)
            elif isinstance(value, (list, tuple)):
                for i, v in enumerate(value):
                    flatten(f"{prefix}[{i}]", v)
            else:
                rows.append(["metric", prefix, value, "", ""])

        flatten("", self.metrics)
        for c in self.checks:
            rows.append(["check", c.name, c.observed, c.bound, c.passed])
        for phase, seconds in self.timings.items():
            rows.append(["timing", phase, seconds, "", ""])
        return rows

    def dump_csv(self, path: str | os.PathLike) -> None:
        try:
            with open(os.fspath(path), "w", encoding="utf-8", newline="") as fh:
                csv.writer(fh).writerows(self.csv_rows())
        except OSError as exc:
            raise IoFailure(f"cannot write csv {path}: {exc}") from exc


def _catalog(n_classes: int) -> LabelCatalog:
    return LabelCatalog.from_names(class_names(n_classes))


def _query_embeddings(rows, catalog) -> tuple[list[Embedding], list[int]]:
    queries = [normalize(np.asarray(r.vector, dtype=np.float64)) for r in rows]
    truths = [catalog.id_of(r.label) for r in rows]
    return queries, truths


def _items_from_points(points_per_class, id_start=0, provenance=Provenance.BASE,
                       source_tag="synthetic", labels=None):
    """points_per_class: list of (class_id, ndarray of unit rows)."""
    items = []
    item_id = id_start
    for class_id, pts in points_per_class:
        for row in pts:
            items.append(
                ReferenceItem(
                    item_id=item_id,
                    embedding=Embedding(
                        np.asarray(row, dtype=np.float32), normalized=True
                    ),
                    class_id=class_id,
                    provenance=provenance,
                    source_tag=source_tag,
                )
            )
            item_id += 1
    if labels is not None:
        items = [
            ReferenceItem(i.item_id, i.embedding, labels[n], i.provenance, i.source_tag)
            for n, i in enumerate(items)
        ]
    return items


def _search_metrics(queries, truths, index, cfg, ks):
    """evaluate() over the plain diagnosis path, honoring the parallel flag."""
    if cfg["parallel"]:
        preds = [
            predict(q, index, k=cfg["k_neighbors"], n=cfg["top_n"], parallel=True)
            for q in queries
        ]
    else:
        preds = predict_batch(queries, index, k=cfg["k_neighbors"], n=cfg["top_n"])
    return preds, evaluate(preds, truths, ks, index.snapshot.catalog)


def _run_topk_curve(cfg: dict) -> ExperimentReport:
    timings: dict[str, float] = {}
    t_start = time.perf_counter()
    spec = ClusterSpec(
        n_classes=cfg["n_classes"],
        per_class_reference=cfg["per_class_reference"],
        per_class_query=cfg["per_class_query"],
        dim=cfg["dim"],
        min_angle_deg=cfg["min_angle_deg"],
        sigma=cfg["sigma"],
        seed=cfg["seed"],
    )
    ref_rows, query_rows = gen_clusters(spec)
    catalog = _catalog(spec.n_classes)
    items = items_from_manifest(
        ref_rows, catalog, dim=spec.dim, provenance=Provenance.BASE
    )
    snapshot = LibrarySnapshot.from_items(items, catalog)
    queries, truths = _query_embeddings(query_rows, catalog)
    timings["generate"] = time.perf_counter() - t_start

    t = time.perf_counter()
    ks = [int(k) for k in cfg["ks"]]
    preds, report = _search_metrics(queries, truths, build_index(snapshot), cfg, ks)
    timings["predict"] = time.perf_counter() - t

    t = time.perf_counter()
    ranked = [[ls.class_id for ls in p.ranked_labels] for p in preds]
    want = oracle_count(ranked, truths, ks, list(catalog.ids()))
    diff = 0.0
    for k in ks:
        diff = max(diff, abs(report.top_k_accuracy[k] - want["topk"][k]))
        diff = max(diff, abs(report.macro_recall[k] - want["macro_recall"][k]))
        for c, rec in want["recall"][k].items():
            diff = max(diff, abs(report.per_class_recall[k][c] - rec))
    diff = max(
        diff,
        float(
            np.abs(
                report.confusion_top1 - np.asarray(want["confusion"], dtype=np.int64)
            ).max()
        ),
    )
    timings["oracle"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t_start

    accs = [report.top_k_accuracy[k] for k in sorted(ks)]
    monotone_margin = min(
        (b - a for a, b in zip(accs, accs[1:])), default=0.0
    )
    metrics = {
        "topk_accuracy": {str(k): report.top_k_accuracy[k] for k in ks},
        "macro_recall": {str(k): report.macro_recall[k] for k in ks},
        "oracle_max_diff": diff,
        "n_queries": report.n_samples,
    }
    checks = (
        _ge("top1_accuracy", report.top_k_accuracy[min(ks)], 0.99),
        _ge("topk_monotone_margin", monotone_margin, 0.0),
        _le("oracle_max_diff", diff, 1e-12),
        _lt("runtime_s", timings["total"], RUNTIME_BUDGET_S),
    )
    return ExperimentReport("topk_curve", cfg, metrics, checks, timings)


def _shift_data(cfg: dict, offset_norm: float):
    """Clean references, shifted queries and shifted local items."""
    rng = np.random.default_rng(cfg["seed"])
    dim = cfg["dim"]
    n_classes = cfg["n_classes"]
    centroids = place_centroids(rng, n_classes, dim, cfg["min_angle_deg"])
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    offset = offset_norm * direction
    sigma = cfg["sigma"]

    ref_points = []
    query_points = []
    local_points = []
    for c in range(n_classes):
        ref_points.append((c, sample_points(rng, centroids[c], cfg["per_class_reference"], sigma)))
        query_points.append((c, sample_points(rng, centroids[c], cfg["per_class_query"], sigma, offset=offset)))
        local_points.append((c, sample_points(rng, centroids[c], cfg["per_class_local"], sigma, offset=offset)))
    catalog = _catalog(n_classes)
    base = LibrarySnapshot.from_items(
        _items_from_points(ref_points), catalog
    )
    locals_ = _items_from_points(
        local_points,
        id_start=base.next_item_id(),
        provenance=Provenance.LOCAL,
        source_tag="shifted-site",
    )
    queries = []
    truths = []
    for c, pts in query_points:
        for row in pts:
            queries.append(Embedding(np.asarray(row, dtype=np.float32), normalized=True))
            truths.append(c)
    return base, locals_, queries, truths


def _shift_pass(cfg: dict, offset_norm: float, ks):
    base, locals_, queries, truths = _shift_data(cfg, offset_norm)
    merged = merge(base, locals_)
    return compare_before_after(
        build_index(base),
        build_index(merged),
        queries,
        truths,
        ks,
        k_neighbors=cfg["k_neighbors"],
        top_n=cfg["top_n"],
    )


def _run_shift_recovery(cfg: dict) -> ExperimentReport:
    timings: dict[str, float] = {}
    t_start = time.perf_counter()
    ks = [int(k) for k in cfg["ks"]]
    before, after = _shift_pass(cfg, cfg["offset_norm"], ks)
    timings["shifted"] = time.perf_counter() - t_start

    t = time.perf_counter()
    null_before, null_after = _shift_pass(cfg, 0.0, ks)
    null_delta = abs(null_after.top_k_accuracy[1] - null_before.top_k_accuracy[1])
    timings["null_control"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t_start

    recovery_margin = min(
        after.top_k_accuracy[k] - before.top_k_accuracy[k] for k in ks
    )
    metrics = {
        "before_topk": {str(k): before.top_k_accuracy[k] for k in ks},
        "after_topk": {str(k): after.top_k_accuracy[k] for k in ks},
        "gain_top1": after.top_k_accuracy[1] - before.top_k_accuracy[1],
        "null_delta_top1": null_delta,
        "n_queries": before.n_samples,
    }
    checks = (
        _lt("before_top1", before.top_k_accuracy[1], 0.70),
        _ge("after_top1", after.top_k_accuracy[1], 0.95),
        _ge("gain_top1", metrics["gain_top1"], 0.2),
        _ge("recovery_margin_all_k", recovery_margin, 0.0),
        _le("null_delta_top1", null_delta, 0.02),
        _lt("runtime_s", timings["total"], RUNTIME_BUDGET_S),
    )
    return ExperimentReport("shift_recovery", cfg, metrics, checks, timings)


def _flip_labels(rng, class_ids: np.ndarray, n_classes: int, flip_rate: float):
    flipped = class_ids.copy()
    n_flips = int(round(flip_rate * len(class_ids)))
    picks = rng.choice(len(class_ids), size=n_flips, replace=False)
    for i in picks:
        shift = 1 + int(rng.integers(n_classes - 1))
        flipped[i] = (flipped[i] + shift) % n_classes
    return flipped, n_flips


def _mc_accuracy(reports, truths) -> float:
    return sum(1 for r, t in zip(reports, truths) if r.final_class == t) / len(truths)


def _run_triage(cfg: dict) -> ExperimentReport:
    timings: dict[str, float] = {}
    t_start = time.perf_counter()
    rng = np.random.default_rng(cfg["seed"])
    n_classes = cfg["n_classes"]
    dim = cfg["dim"]
    sigma = cfg["sigma"]
    centroids = place_centroids(rng, n_classes, dim, cfg["min_angle_deg"])
    ref_points = [
        (c, sample_points(rng, centroids[c], cfg["per_class_reference"], sigma))
        for c in range(n_classes)
    ]
    true_labels = np.repeat(np.arange(n_classes), cfg["per_class_reference"])
    noisy_labels, n_flips = _flip_labels(
        rng, true_labels, n_classes, cfg["flip_rate"]
    )
    items = _items_from_points(ref_points, labels=[int(x) for x in noisy_labels])
    catalog = _catalog(n_classes)
    snapshot = LibrarySnapshot.from_items(items, catalog)

    def draw_queries(per_class):
        queries, truths = [], []
        for c in range(n_classes):
            for row in sample_points(rng, centroids[c], per_class, sigma):
                queries.append(
                    Embedding(np.asarray(row, dtype=np.float32), normalized=True)
                )
                truths.append(c)
        return queries, truths

    cal_queries, cal_truths = draw_queries(cfg["per_class_calibration"])
    eval_queries, eval_truths = draw_queries(cfg["per_class_eval"])
    timings["generate"] = time.perf_counter() - t_start

    t = time.perf_counter()
    espec = EnsembleSpec(
        passes=cfg["passes"], mask_rate=cfg["mask_rate"], seed=cfg["seed"]
    )
    cal_reports = mc_predict_batch(cal_queries, snapshot, espec, k=cfg["k_neighbors"])
    scored = [
        (r.cscore, r.final_class == t) for r, t in zip(cal_reports, cal_truths)
    ]
    calibration = calibrate_threshold(scored)
    timings["calibrate"] = time.perf_counter() - t

    t = time.perf_counter()
    eval_reports = mc_predict_batch(
        eval_queries, snapshot, espec, k=cfg["k_neighbors"]
    )
    acc_all = _mc_accuracy(eval_reports, eval_truths)
    triaged = apply_threshold(eval_reports, calibration.theta_star)
    retained_pairs = [
        (r, t)
        for r, t in zip(eval_reports, eval_truths)
        if r.cscore >= calibration.theta_star
    ]
    acc_retained = (
        sum(1 for r, t in retained_pairs if r.final_class == t) / len(retained_pairs)
        if retained_pairs
        else 0.0
    )
    timings["evaluate"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t_start

    gap = acc_retained - acc_all
    metrics = {
        "theta_star": calibration.theta_star,
        "accuracy_all": acc_all,
        "accuracy_retained": acc_retained,
        "gap": gap,
        "retained_fraction": len(triaged.retained) / len(eval_reports),
        "flagged_fraction": len(triaged.flagged) / len(eval_reports),
        "calibration_accuracy": sum(ok for _, ok in scored) / len(scored),
        "flipped_reference_labels": n_flips,
        "n_eval_queries": len(eval_reports),
    }
    checks = (
        _ge("triage_gap", gap, 0.03),
        _ge("retained_not_worse", gap, 0.0),
        _lt("runtime_s", timings["total"], RUNTIME_BUDGET_S),
    )
    return ExperimentReport("triage", cfg, metrics, checks, timings)


def _run_ood(cfg: dict) -> ExperimentReport:
    timings: dict[str, float] = {}
    t_start = time.perf_counter()
    rng = np.random.default_rng(cfg["seed"])
    n_classes = cfg["n_classes"]
    dim = cfg["dim"]
    sigma = cfg["sigma"]
    id_centroids = place_centroids(rng, n_classes, dim, cfg["min_angle_deg"])
    ood_centroids = place_centroids(
        rng, cfg["ood_classes"], dim, cfg["ood_min_angle_deg"], avoid=id_centroids
    )
    min_distance = min(
        float(np.linalg.norm(o - c)) for o in ood_centroids for c in id_centroids
    )
    ref_points = [
        (c, sample_points(rng, id_centroids[c], cfg["per_class_reference"], sigma))
        for c in range(n_classes)
    ]
    snapshot = LibrarySnapshot.from_items(
        _items_from_points(ref_points), _catalog(n_classes)
    )

    def draw(centroid_rows, per_class, noise):
        out = []
        for centroid in centroid_rows:
            for row in sample_points(rng, centroid, per_class, noise):
                out.append(
                    Embedding(np.asarray(row, dtype=np.float32), normalized=True)
                )
        return out

    # Calibration intake is noisier than the curated library so both vote
    # outcomes occur and the threshold sweep has something to separate.
    cal_queries = draw(id_centroids, cfg["per_class_calibration"], cfg["calibration_sigma"])
    cal_truths = [
        c for c in range(n_classes) for _ in range(cfg["per_class_calibration"])
    ]
    holdout_queries = draw(id_centroids, cfg["per_class_holdout"], sigma)
    ood_queries = draw(ood_centroids, cfg["per_class_ood"], sigma)
    timings["generate"] = time.perf_counter() - t_start

    t = time.perf_counter()
    espec = EnsembleSpec(
        passes=cfg["passes"], mask_rate=cfg["mask_rate"], seed=cfg["seed"]
    )
    cal_reports = mc_predict_batch(cal_queries, snapshot, espec, k=cfg["k_neighbors"])
    scored = [
        (r.cscore, r.final_class == t) for r, t in zip(cal_reports, cal_truths)
    ]
    calibration = calibrate_threshold(scored)
    timings["calibrate"] = time.perf_counter() - t

    t = time.perf_counter()
    holdout_reports = mc_predict_batch(
        holdout_queries, snapshot, espec, k=cfg["k_neighbors"]
    )
    ood_reports = mc_predict_batch(ood_queries, snapshot, espec, k=cfg["k_neighbors"])
    rates = ood_detection_rate(
        {"in_distribution": holdout_reports, "far_ood": ood_reports},
        calibration.theta_star,
    )
    timings["detect"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t_start

    metrics = {
        "theta_star": calibration.theta_star,
        "ood_flag_rate": rates["far_ood"],
        "id_flag_rate": rates["in_distribution"],
        "calibration_accuracy": sum(ok for _, ok in scored) / len(scored),
        "min_centroid_distance": min_distance,
        "six_sigma": 6.0 * sigma,
        "n_ood_queries": len(ood_queries),
    }
    checks = (
        _ge("ood_flag_rate", rates["far_ood"], 0.90),
        _le("id_flag_rate", rates["in_distribution"], 0.15),
        _ge("ood_centroid_distance", min_distance, 6.0 * sigma),
        _lt("runtime_s", timings["total"], RUNTIME_BUDGET_S),
    )
    return ExperimentReport("ood", cfg, metrics, checks, timings)


def _run_retrieval_hitrate(cfg: dict) -> ExperimentReport:
    timings: dict[str, float] = {}
    t_start = time.perf_counter()
    rng = np.random.default_rng(cfg["seed"])
    n_classes = cfg["n_classes"]
    centroids = place_centroids(rng, n_classes, cfg["dim"], cfg["min_angle_deg"])
    sigma = cfg["sigma"]

    store_items = []
    true_class: dict[int, int] = {}
    item_id = 0
    for c in range(n_classes):
        for row in sample_points(rng, centroids[c], cfg["per_class_reference"], sigma):
            store_items.append(
                ReferenceItem(
                    item_id=item_id,
                    embedding=Embedding(
                        np.asarray(row, dtype=np.float32), normalized=True
                    ),
                    class_id=None,
                    source_tag="synthetic",
                )
            )
            true_class[item_id] = c
            item_id += 1
    store = build_case_store(
        LibrarySnapshot.from_items(store_items, LabelCatalog.from_names([]))
    )
    queries = []
    query_classes = []
    for c in range(n_classes):
        for row in sample_points(rng, centroids[c], cfg["per_class_query"], sigma):
            queries.append(
                Embedding(np.asarray(row, dtype=np.float32), normalized=True)
            )
            query_classes.append(c)
    timings["generate"] = time.perf_counter() - t_start

    t = time.perf_counter()
    flip_rates = [float(x) for x in cfg["reviewer_flip_rates"]]
    reviewers = [f"reviewer_{i + 1}" for i in range(len(flip_rates))]
    review_queries = []
    for qi, (query, qc) in enumerate(zip(queries, query_classes)):
        hits = retrieve_cases(store, query, k=cfg["k_retrieve"])
        candidates = tuple(h.item_id for h in hits)
        relevant = [true_class[c] == qc for c in candidates]
        verdicts = {}
        for reviewer, flip in zip(reviewers, flip_rates):
            flips = rng.random(len(candidates)) < flip
            verdicts[reviewer] = tuple(
                bool(rel) ^ bool(fl) for rel, fl in zip(relevant, flips)
            )
        review_queries.append(
            ReviewQuery(query_id=f"q{qi:03d}", candidates=candidates, verdicts=verdicts)
        )
    sheet = ReviewSheet(queries=tuple(review_queries))
    ks = [int(k) for k in cfg["ks"]]
    report = topk_hit_rate(sheet, ks)
    timings["review"] = time.perf_counter() - t

    t = time.perf_counter()
    # independent recount straight off the sheet
    recount_diff = 0.0
    for reviewer in reviewers:
        for k in ks:
            hits = 0
            for q in sheet.queries:
                found = False
                for verdict in q.verdicts[reviewer][:k]:
                    if verdict:
                        found = True
                hits += 1 if found else 0
            recount_diff = max(
                recount_diff,
                abs(report.by_reviewer[reviewer][k] - hits / len(sheet.queries)),
            )
    timings["recount"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t_start

    monotone_margin = min(
        min(
            report.by_reviewer[r][b] - report.by_reviewer[r][a]
            for a, b in zip(sorted(ks), sorted(ks)[1:])
        )
        for r in reviewers
    )
    metrics = {
        "average_hit_rate": {str(k): report.average[k] for k in ks},
        "by_reviewer": {
            r: {str(k): report.by_reviewer[r][k] for k in ks} for r in reviewers
        },
        "recount_max_diff": recount_diff,
        "n_queries": len(queries),
    }
    checks = (
        _ge("hit_rate_monotone_margin", monotone_margin, 0.0),
        _le("recount_max_diff", recount_diff, 0.0),
        _ge(
            "topk_beats_top1",
            report.average[max(ks)] - report.average[min(ks)],
            0.0,
        ),
        _lt("runtime_s", timings["total"], RUNTIME_BUDGET_S),
    )
    return ExperimentReport("retrieval_hitrate", cfg, metrics, checks, timings)


DEFAULTS: dict[str, dict] = {
    "topk_curve": {
        "seed": 0,
        "n_classes": 11,
        "per_class_reference": 200,
        "per_class_query": 50,
        "dim": 512,
        "min_angle_deg": 45.0,
        "sigma": 0.05,
        "k_neighbors": 30,
        "top_n": 5,
        "ks": [1, 3, 5],
        "parallel": False,
    },
    "shift_recovery": {
        "seed": 0,
        "n_classes": 15,
        "per_class_reference": 200,
        "per_class_query": 50,
        "per_class_local": 100,
        "dim": 4,
        "min_angle_deg": 35.0,
        "sigma": 0.09,
        "offset_norm": 0.8,
        "k_neighbors": 15,
        "top_n": 5,
        "ks": [1, 3, 5],
        "parallel": False,
    },
    "triage": {
        "seed": 0,
        "n_classes": 8,
        "per_class_reference": 60,
        "per_class_calibration": 30,
        "per_class_eval": 40,
        "dim": 32,
        "min_angle_deg": 50.0,
        "sigma": 0.35,
        "flip_rate": 0.10,
        "passes": 100,
        "mask_rate": 0.1,
        "k_neighbors": 30,
        "parallel": False,
    },
    "ood": {
        "seed": 0,
        "n_classes": 30,
        "per_class_reference": 50,
        "per_class_calibration": 50,
        "per_class_holdout": 15,
        "ood_classes": 6,
        "per_class_ood": 20,
        "dim": 96,
        "min_angle_deg": 45.0,
        "ood_min_angle_deg": 80.0,
        "sigma": 0.15,
        "calibration_sigma": 0.22,
        "passes": 100,
        # High mask rate with single-neighbor votes: an in-library query keeps
        # retrieving its own cluster while a far-OOD query scatters across
        # whichever weak alignment survives each mask.
        "mask_rate": 0.65,
        "k_neighbors": 1,
        "parallel": False,
    },
    "retrieval_hitrate": {
        "seed": 0,
        "n_classes": 6,
        "per_class_reference": 50,
        "per_class_query": 5,
        "dim": 32,
        "min_angle_deg": 45.0,
        "sigma": 0.45,
        "k_retrieve": 10,
        "ks": [1, 3, 5, 10],
        "reviewer_flip_rates": [0.05, 0.15, 0.25],
        "parallel": False,
    },
}

_RUNNERS = {
    "topk_curve": _run_topk_curve,
    "shift_recovery": _run_shift_recovery,
    "triage": _run_triage,
    "ood": _run_ood,
    "retrieval_hitrate": _run_retrieval_hitrate,
}

EXPERIMENT_NAMES = tuple(sorted(_RUNNERS))


def run_experiment(name: str, config: dict | None = None) -> ExperimentReport:
    """Run one named experiment with defaults overlaid by config."""
    if name not in _RUNNERS:
        raise UnknownExperiment(
            f"unknown experiment {name!r}; expected one of {EXPERIMENT_NAMES}"
        )
    merged = dict(DEFAULTS[name])
    config = config or {}
    unknown = set(config) - set(merged)
    if unknown:
        raise ConfigError(
            f"unknown config keys for {name}: {sorted(unknown)}"
        )
    merged.update(config)
    return _RUNNERS[name](merged)
