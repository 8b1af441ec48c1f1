"""Site-local retrieval augmentation.

Local embeddings are appended to the base snapshot as a new generation;
the base snapshot itself is never touched, so readers holding the old
generation keep consistent results.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    LabelCatalog,
    LibrarySnapshot,
    Provenance,
    ReferenceItem,
    items_from_manifest,
    read_manifest,
)
from .diagnosis import MetricsReport, evaluate, predict_batch
from .errors import DimMismatch, IdCollision
from .index import VectorIndex


def ingest_local(
    manifest_path: str | os.PathLike,
    catalog: LabelCatalog,
    site_id: str,
    base: LibrarySnapshot,
) -> list[ReferenceItem]:
    """Parse a site's manifest into LOCAL items.

    Labels are required and must exist in the catalog; ids are
    allocated above every id in the base snapshot.
    """
    rows = read_manifest(manifest_path)
    return items_from_manifest(
        rows,
        catalog,
        dim=base.dim,
        provenance=Provenance.LOCAL,
        id_start=base.next_item_id(),
        assign_ids=True,
        source_default=site_id,
        allow_unlabeled=False,
    )


def merge(base: LibrarySnapshot, local: Sequence[ReferenceItem]) -> LibrarySnapshot:
    """New snapshot = base items + local items, generation + 1."""
    for item in local:
        if item.embedding.dim != base.dim:
            raise DimMismatch(
                f"local item {item.item_id} dim {item.embedding.dim} != {base.dim}"
            )
    base_ids = set(int(i) for i in base.item_ids)
    for item in local:
        if item.item_id in base_ids:
            raise IdCollision(f"local item id {item.item_id} already in base")
    if not local:
        return LibrarySnapshot(
            generation=base.generation + 1,
            catalog=base.catalog,
            item_ids=base.item_ids,
            class_ids=base.class_ids,
            provenance=base.provenance,
            source_tags=base.source_tags,
            vectors=base.vectors,
        )
    add = LibrarySnapshot.from_items(list(local), base.catalog)
    return LibrarySnapshot(
        generation=base.generation + 1,
        catalog=base.catalog,
        item_ids=np.concatenate([base.item_ids, add.item_ids]),
        class_ids=np.concatenate([base.class_ids, add.class_ids]),
        provenance=np.concatenate([base.provenance, add.provenance]),
        source_tags=base.source_tags + add.source_tags,
        vectors=np.concatenate([base.vectors, add.vectors]),
    )


@dataclass(frozen=True)
class SiteRecord:
    site_id: str
    items: int
    last_generation: int


@dataclass
class SiteRegistry:
    """Bookkeeping of which site contributed how many LOCAL items."""

    sites: dict[str, SiteRecord]

    @classmethod
    def from_snapshot(cls, snapshot: LibrarySnapshot) -> "SiteRegistry":
        counts: dict[str, int] = {}
        for row in range(len(snapshot)):
            if snapshot.provenance[row] == Provenance.LOCAL:
                tag = snapshot.source_tags[row]
                counts[tag] = counts.get(tag, 0) + 1
        return cls(
            sites={
                tag: SiteRecord(tag, count, snapshot.generation)
                for tag, count in counts.items()
            }
        )

    def record_merge(self, site_id: str, added: int, generation: int) -> None:
        prev = self.sites.get(site_id)
        total = (prev.items if prev else 0) + added
        self.sites[site_id] = SiteRecord(site_id, total, generation)

    def to_json(self) -> dict:
        return {
            "sites": {
                s.site_id: {"items": s.items, "last_generation": s.last_generation}
                for s in self.sites.values()
            }
        }


def compare_before_after(
    base_index: VectorIndex,
    merged_index: VectorIndex,
    queries,
    truths: Sequence[int],
    ks: Sequence[int],
    k_neighbors: int = 30,
    top_n: int = 5,
) -> tuple[MetricsReport, MetricsReport]:
    """Same queries and parameters against both indices; no mutation."""
    if base_index.snapshot.catalog != merged_index.snapshot.catalog:
        raise DimMismatch("indices do not share a catalog")
    if base_index.dim != merged_index.dim:
        raise DimMismatch(
            f"index dims differ: {base_index.dim} vs {merged_index.dim}"
        )
    catalog = base_index.snapshot.catalog
    before = evaluate(
        predict_batch(queries, base_index, k=k_neighbors, n=top_n),
        truths,
        ks,
        catalog,
    )
    after = evaluate(
        predict_batch(queries, merged_index, k=k_neighbors, n=top_n),
        truths,
        ks,
        catalog,
    )
    return before, after
