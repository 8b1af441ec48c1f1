"""Serving facade: one loaded library + optional case store behind a
single-writer, many-reader state swap.

Readers grab self._state once per request, so every response is
computed against exactly one generation even while an augment swaps in
the next one.
"""
from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass

from refmatch.augment import ingest_local, merge
from refmatch.config import EngineConfig, write_state
from refmatch.confidence import (
    CalibrationResult,
    calibrate_threshold,
    mc_predict,
)
from refmatch.core import (
    Embedding,
    LibrarySnapshot,
    Provenance,
    load_library,
    normalize,
    read_manifest,
)
from refmatch.diagnosis import MetricsReport, evaluate, predict
from refmatch.errors import (
    CaseStoreUnset,
    ConfigError,
    ThetaUnset,
    UnknownLabel,
)
from refmatch.index import VectorIndex, build_index
from refmatch.retrieval import CaseHit, CaseStore, load_case_store, retrieve_cases


@dataclass(frozen=True)
class DiagnosisResponse:
    """What a diagnose call returns over any surface (API, CLI)."""

    ranked_labels: tuple[tuple[str, float], ...]
    generation: int
    timing_ms: float
    cscore: float | None = None
    reliable: bool | None = None
    theta: float | None = None
    per_pass_votes: dict[str, int] | None = None

    def to_json(self) -> dict:
        return {
            "ranked_labels": [
                {"label": name, "score": score} for name, score in self.ranked_labels
            ],
            "cscore": self.cscore,
            "reliable": self.reliable,
            "theta": self.theta,
            "generation": self.generation,
            "timing_ms": self.timing_ms,
            "per_pass_votes": self.per_pass_votes,
        }


@dataclass(frozen=True)
class _State:
    snapshot: LibrarySnapshot
    index: VectorIndex


class Engine:
    """Composition root owning the live snapshot and its index."""

    def __init__(
        self,
        config: EngineConfig,
        snapshot: LibrarySnapshot,
        case_store: CaseStore | None = None,
    ):
        if len(snapshot) and snapshot.dim != config.dim:
            raise ConfigError(
                f"config dim {config.dim} != library dim {snapshot.dim}"
            )
        self._config = config
        self._state = _State(snapshot, build_index(snapshot))
        self._case_store = case_store
        self._theta = config.theta_star
        self._last_metrics: MetricsReport | None = None
        self._writer_lock = threading.Lock()

    @classmethod
    def load(cls, config: EngineConfig) -> "Engine":
        snapshot = load_library(config.library_path)
        store = None
        if config.case_store_path:
            store = load_case_store(config.case_store_path)
        return cls(config, snapshot, case_store=store)

    # --- read side ---

    @property
    def config(self) -> EngineConfig:
        return self._config

    @property
    def snapshot(self) -> LibrarySnapshot:
        return self._state.snapshot

    @property
    def generation(self) -> int:
        return self._state.snapshot.generation

    @property
    def theta_star(self) -> float | None:
        return self._theta

    def diagnose(
        self, query: Embedding, k: int | None = None, n: int | None = None
    ) -> DiagnosisResponse:
        state = self._state
        start = time.perf_counter()
        prediction = predict(
            query,
            state.index,
            k=k or self._config.k_neighbors,
            n=n or self._config.top_n,
        )
        elapsed = (time.perf_counter() - start) * 1e3
        catalog = state.snapshot.catalog
        return DiagnosisResponse(
            ranked_labels=tuple(
                (catalog.name_of(ls.class_id), float(ls.score))
                for ls in prediction.ranked_labels
            ),
            generation=state.snapshot.generation,
            timing_ms=elapsed,
        )

    def diagnose_confident(
        self, query: Embedding, k: int | None = None, theta: float | None = None
    ) -> DiagnosisResponse:
        theta = self._theta if theta is None else theta
        if theta is None:
            raise ThetaUnset("no calibrated threshold; run calibrate first")
        state = self._state
        start = time.perf_counter()
        report = mc_predict(
            query,
            state.snapshot,
            self._config.ensemble,
            k=k or self._config.k_neighbors,
        ).with_threshold(theta)
        elapsed = (time.perf_counter() - start) * 1e3
        catalog = state.snapshot.catalog
        votes = sorted(report.per_pass_votes.items(), key=lambda kv: (-kv[1], kv[0]))
        return DiagnosisResponse(
            ranked_labels=tuple(
                (catalog.name_of(class_id), count / report.passes)
                for class_id, count in votes
            ),
            generation=state.snapshot.generation,
            timing_ms=elapsed,
            cscore=report.cscore,
            reliable=report.reliable,
            theta=theta,
            per_pass_votes={
                catalog.name_of(c): count for c, count in report.per_pass_votes.items()
            },
        )

    def retrieve(self, query: Embedding, k: int = 10) -> tuple[list[CaseHit], int]:
        if self._case_store is None:
            raise CaseStoreUnset("no case store configured")
        hits = retrieve_cases(self._case_store, query, k=k)
        return hits, self._state.snapshot.generation

    def health(self) -> dict:
        state = self._state
        snapshot = state.snapshot
        prov = snapshot.provenance
        return {
            "generation": snapshot.generation,
            "dim": snapshot.dim,
            "item_count": len(snapshot),
            "by_provenance": {
                "base": int((prov == int(Provenance.BASE)).sum()),
                "local": int((prov == int(Provenance.LOCAL)).sum()),
            },
            "theta_star": self._theta,
            "case_store": self._case_store is not None,
        }

    def metrics(self) -> dict:
        last = self._last_metrics
        payload = self.health()
        payload["last_evaluation"] = last.to_json() if last else None
        return payload

    # --- write side (single writer) ---

    def augment(self, manifest_path: str | os.PathLike, site_id: str) -> dict:
        with self._writer_lock:
            base = self._state.snapshot
            local = ingest_local(manifest_path, base.catalog, site_id, base)
            merged = merge(base, local)
            index = build_index(merged)
            self._state = _State(merged, index)
            return {
                "old_generation": base.generation,
                "new_generation": merged.generation,
                "added": len(local),
            }

    def calibrate(self, scored: list[tuple[float, bool]]) -> CalibrationResult:
        with self._writer_lock:
            result = calibrate_threshold(scored)
            self._theta = result.theta_star
            if self._config.state_path:
                write_state(self._config.state_path, result.theta_star)
            return result

    # --- evaluation ---

    def evaluate_manifest(
        self, manifest_path: str | os.PathLike, ks: tuple[int, ...] = (1, 3, 5)
    ) -> MetricsReport:
        state = self._state
        catalog = state.snapshot.catalog
        rows = read_manifest(manifest_path)
        queries, truths = [], []
        for row in rows:
            if row.label is None:
                raise UnknownLabel("evaluation rows must be labeled")
            truths.append(catalog.id_of(row.label))
            queries.append(normalize(row.vector))
        predictions = [
            predict(q, state.index, k=self._config.k_neighbors, n=max(ks))
            for q in queries
        ]
        report = evaluate(predictions, truths, ks, catalog)
        self._last_metrics = report
        return report
