"""Exact top-k similarity search over a library snapshot.

The index is a thin immutable view over the snapshot's packed f32
matrix; scanning happens in the kernel backends.  Ranking is total:
score descending, then item id ascending, so results are reproducible
at any parallelism degree.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .core import Embedding, LibrarySnapshot, Provenance
from .errors import DimMismatch, EmptyLibrary, EngineError, NotNormalized


class Hit(NamedTuple):
    item_id: int
    class_id: int | None
    provenance: Provenance
    score: float


@dataclass(frozen=True)
class RankedHits:
    """Search output; entries sorted by (score desc, item_id asc)."""

    entries: tuple[Hit, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def ids(self) -> list[int]:
        return [h.item_id for h in self.entries]

    def scores(self) -> list[float]:
        return [h.score for h in self.entries]


@dataclass(frozen=True)
class VectorIndex:
    """Searchable view bound to exactly one snapshot generation."""

    snapshot: LibrarySnapshot

    @property
    def generation(self) -> int:
        return self.snapshot.generation

    @property
    def dim(self) -> int:
        return self.snapshot.dim

    @property
    def matrix(self) -> np.ndarray:
        return self.snapshot.vectors

    def __len__(self) -> int:
        return len(self.snapshot)

    def row_to_item(self, row: int) -> tuple[int, int | None, Provenance]:
        cid = int(self.snapshot.class_ids[row])
        return (
            int(self.snapshot.item_ids[row]),
            None if cid < 0 else cid,
            Provenance(int(self.snapshot.provenance[row])),
        )


def build_index(snapshot: LibrarySnapshot) -> VectorIndex:
    """Wrap a snapshot for searching; empty libraries are not searchable."""
    if len(snapshot) == 0:
        raise EmptyLibrary("cannot build an index over zero items")
    return VectorIndex(snapshot=snapshot)


def _check_query(index: VectorIndex, query: Embedding) -> None:
    if not isinstance(query, Embedding):
        raise NotNormalized("query must be a normalized Embedding")
    if not query.normalized:
        raise NotNormalized("query embedding is not normalized")
    if query.dim != index.dim:
        raise DimMismatch(f"query dim {query.dim} != index dim {index.dim}")


def _to_hits(index: VectorIndex, rows: np.ndarray, scores: np.ndarray) -> RankedHits:
    entries = []
    for row, score in zip(rows, scores):
        item_id, class_id, prov = index.row_to_item(int(row))
        entries.append(Hit(item_id, class_id, prov, float(score)))
    return RankedHits(entries=tuple(entries))


def search(
    index: VectorIndex,
    query: Embedding,
    k: int,
    parallel: bool = False,
) -> RankedHits:
    """The k best matches for one query; all N when k > N."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    _check_query(index, query)
    rows, scores = kernels.topk(
        index.matrix, index.snapshot.item_ids, query.values, k, parallel=parallel
    )
    return _to_hits(index, rows, scores)


def batch_search(
    index: VectorIndex,
    queries: Sequence[Embedding],
    k: int,
) -> list[RankedHits | EngineError]:
    """Per-query results in input order.

    A query that fails validation contributes its error object at its
    position instead of aborting the batch; valid queries still run.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    results: list[RankedHits | EngineError] = [None] * len(queries)  # type: ignore[list-item]
    good: list[int] = []
    for i, query in enumerate(queries):
        try:
            _check_query(index, query)
            good.append(i)
        except EngineError as exc:
            exc.detail.setdefault("position", i)
            results[i] = exc
    if good:
        stacked = np.stack([queries[i].values for i in good])
        rows, scores = kernels.batch_topk(
            index.matrix, index.snapshot.item_ids, stacked, k
        )
        for out_row, i in enumerate(good):
            results[i] = _to_hits(index, rows[out_row], scores[out_row])
    return results
