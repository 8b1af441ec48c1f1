"""Similar-case retrieval over unlabeled stores and reviewer scoring.

Case stores reuse the library format with class_id = -1; display
metadata (an opaque external_ref per item) lives in a JSON sidecar next
to the store file, keyed by item id.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

from .core import Embedding, LibrarySnapshot, load_library
from .errors import CorruptRecord, IncompleteSheet, IoFailure
from .index import RankedHits, VectorIndex, build_index, search

REFS_SUFFIX = ".refs.json"


class CaseMeta(NamedTuple):
    external_ref: str
    source_tag: str


class CaseHit(NamedTuple):
    item_id: int
    score: float
    external_ref: str
    source_tag: str


@dataclass(frozen=True)
class CaseStore:
    """Unlabeled snapshot plus per-item display metadata."""

    snapshot: LibrarySnapshot
    metadata: dict[int, CaseMeta]

    def __post_init__(self):
        ids = set(int(i) for i in self.snapshot.item_ids)
        if set(self.metadata) != ids:
            raise CorruptRecord("metadata keys do not match store item ids")

    def __len__(self) -> int:
        return len(self.snapshot)

    @cached_property
    def index(self) -> VectorIndex:
        return build_index(self.snapshot)


def build_case_store(
    snapshot: LibrarySnapshot,
    external_refs: dict[int, str] | None = None,
) -> CaseStore:
    """Join a snapshot with its refs; items without one get item://<id>."""
    refs = external_refs or {}
    metadata = {}
    for row in range(len(snapshot)):
        item_id = int(snapshot.item_ids[row])
        metadata[item_id] = CaseMeta(
            external_ref=refs.get(item_id, f"item://{item_id}"),
            source_tag=snapshot.source_tags[row],
        )
    return CaseStore(snapshot=snapshot, metadata=metadata)


def load_case_store(
    path: str | os.PathLike,
    refs_path: str | os.PathLike | None = None,
) -> CaseStore:
    """Load a store file and, when present, its refs sidecar
    (<path>.refs.json by default)."""
    snapshot = load_library(path)
    refs_path = os.fspath(refs_path) if refs_path else os.fspath(path) + REFS_SUFFIX
    refs: dict[int, str] = {}
    if os.path.exists(refs_path):
        try:
            with open(refs_path, "r", encoding="utf-8") as fh:
                payload = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise IoFailure(f"cannot read refs sidecar {refs_path}: {exc}") from exc
        if not isinstance(payload.get("external_refs"), dict):
            raise CorruptRecord(f"{refs_path} must hold an external_refs object")
        refs = {int(k): str(v) for k, v in payload["external_refs"].items()}
    return build_case_store(snapshot, refs)


def save_refs_sidecar(
    refs: dict[int, str], store_path: str | os.PathLike
) -> str:
    refs_path = os.fspath(store_path) + REFS_SUFFIX
    try:
        with open(refs_path, "w", encoding="utf-8") as fh:
            json.dump({"external_refs": {str(k): v for k, v in refs.items()}}, fh)
    except OSError as exc:
        raise IoFailure(f"cannot write refs sidecar {refs_path}: {exc}") from exc
    return refs_path


def retrieve_cases(store: CaseStore, query: Embedding, k: int = 10) -> list[CaseHit]:
    """index.search semantics with metadata joined per hit."""
    hits: RankedHits = search(store.index, query, k)
    out = []
    for hit in hits:
        meta = store.metadata[hit.item_id]
        out.append(CaseHit(hit.item_id, hit.score, meta.external_ref, meta.source_tag))
    return out


@dataclass(frozen=True)
class ReviewQuery:
    query_id: str
    candidates: tuple[int, ...]
    verdicts: dict[str, tuple[bool, ...]]


@dataclass(frozen=True)
class ReviewSheet:
    """Reviewer relevance grid over each query's ranked candidates.

    Every query must list the same reviewers and a full verdict row per
    reviewer; candidate lists are duplicate-free and equally long.
    """

    queries: tuple[ReviewQuery, ...]

    def __post_init__(self):
        if not self.queries:
            raise IncompleteSheet("sheet has no queries")
        reviewers = set(self.queries[0].verdicts)
        if not reviewers:
            raise IncompleteSheet("sheet has no reviewers")
        width = len(self.queries[0].candidates)
        seen_ids = set()
        for q in self.queries:
            if q.query_id in seen_ids:
                raise IncompleteSheet(f"duplicate query id {q.query_id!r}")
            seen_ids.add(q.query_id)
            if len(set(q.candidates)) != len(q.candidates):
                raise IncompleteSheet(f"query {q.query_id!r} repeats a candidate")
            if len(q.candidates) != width:
                raise IncompleteSheet(
                    f"query {q.query_id!r} has {len(q.candidates)} candidates, "
                    f"expected {width}"
                )
            if set(q.verdicts) != reviewers:
                raise IncompleteSheet(
                    f"query {q.query_id!r} reviewer set differs"
                )
            for reviewer, row in q.verdicts.items():
                if len(row) != len(q.candidates):
                    raise IncompleteSheet(
                        f"query {q.query_id!r} reviewer {reviewer!r} verdict "
                        f"row is ragged"
                    )

    @property
    def reviewers(self) -> list[str]:
        return sorted(self.queries[0].verdicts)

    @property
    def candidates_per_query(self) -> int:
        return len(self.queries[0].candidates)

    def to_json(self) -> dict:
        return {
            "queries": [
                {
                    "query_id": q.query_id,
                    "candidates": list(q.candidates),
                    "verdicts": {r: list(v) for r, v in q.verdicts.items()},
                }
                for q in self.queries
            ]
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ReviewSheet":
        if not isinstance(payload, dict) or "queries" not in payload:
            raise IncompleteSheet("sheet json must hold a queries list")
        queries = []
        for q in payload["queries"]:
            try:
                queries.append(
                    ReviewQuery(
                        query_id=str(q["query_id"]),
                        candidates=tuple(int(c) for c in q["candidates"]),
                        verdicts={
                            str(r): tuple(bool(x) for x in row)
                            for r, row in q["verdicts"].items()
                        },
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise IncompleteSheet(f"malformed sheet entry: {exc}") from exc
        return cls(queries=tuple(queries))


@dataclass(frozen=True)
class HitRateReport:
    by_reviewer: dict[str, dict[int, float]]
    average: dict[int, float]

    def to_json(self) -> dict:
        return {
            "by_reviewer": {
                r: {str(k): v for k, v in rates.items()}
                for r, rates in self.by_reviewer.items()
            },
            "average": {str(k): v for k, v in self.average.items()},
        }


def topk_hit_rate(sheet: ReviewSheet, ks: Sequence[int]) -> HitRateReport:
    """hit(query, reviewer, k) = any relevant verdict in the first k
    candidates; rates averaged over queries, then over reviewers."""
    ks = sorted(set(int(k) for k in ks))
    width = sheet.candidates_per_query
    for k in ks:
        if not 1 <= k <= width:
            raise IncompleteSheet(f"k={k} outside 1..{width} candidates")
    by_reviewer: dict[str, dict[int, float]] = {}
    for reviewer in sheet.reviewers:
        rates = {}
        for k in ks:
            hits = sum(
                1 for q in sheet.queries if any(q.verdicts[reviewer][:k])
            )
            rates[k] = hits / len(sheet.queries)
        by_reviewer[reviewer] = rates
    average = {
        k: sum(by_reviewer[r][k] for r in sheet.reviewers) / len(sheet.reviewers)
        for k in ks
    }
    return HitRateReport(by_reviewer=by_reviewer, average=average)
