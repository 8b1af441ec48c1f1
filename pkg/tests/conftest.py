from __future__ import annotations

import numpy as np
import pytest

from refmatch.core import (
    Embedding,
    LabelCatalog,
    LibrarySnapshot,
    Provenance,
    ReferenceItem,
    normalize,
)


def unit_rows(rs: np.random.Generator, n: int, dim: int) -> np.ndarray:
    rows = rs.standard_normal((n, dim))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return rows.astype(np.float32)


def make_items(
    rs: np.random.Generator,
    n: int,
    dim: int,
    n_classes: int,
    provenance: Provenance = Provenance.BASE,
    id_start: int = 0,
    source_tag: str = "",
) -> list[ReferenceItem]:
    rows = unit_rows(rs, n, dim)
    return [
        ReferenceItem(
            item_id=id_start + i,
            embedding=Embedding(rows[i], normalized=True),
            class_id=int(rs.integers(n_classes)) if n_classes else None,
            provenance=provenance,
            source_tag=source_tag,
        )
        for i in range(n)
    ]


def make_snapshot(
    rs: np.random.Generator,
    n: int = 30,
    dim: int = 8,
    n_classes: int = 3,
    generation: int = 0,
) -> LibrarySnapshot:
    catalog = LabelCatalog.from_names([f"class_{c}" for c in range(n_classes)])
    return LibrarySnapshot.from_items(
        make_items(rs, n, dim, n_classes), catalog, generation=generation
    )


def make_clustered(
    rs: np.random.Generator,
    n_classes: int,
    per_class: int,
    dim: int,
    sigma: float,
):
    """Well-separated clusters: orthogonal-ish centroids plus noise."""
    centroids = unit_rows(rs, n_classes, dim).astype(np.float64)
    items = []
    item_id = 0
    for c in range(n_classes):
        for _ in range(per_class):
            vec = centroids[c] + sigma * rs.standard_normal(dim)
            items.append(
                ReferenceItem(
                    item_id=item_id,
                    embedding=normalize(vec),
                    class_id=c,
                )
            )
            item_id += 1
    catalog = LabelCatalog.from_names([f"class_{c}" for c in range(n_classes)])
    snapshot = LibrarySnapshot.from_items(items, catalog)
    return snapshot, centroids


@pytest.fixture
def rs() -> np.random.Generator:
    return np.random.default_rng(20240817)
