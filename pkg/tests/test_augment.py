from __future__ import annotations

import json

import numpy as np
import pytest

from refmatch.augment import SiteRegistry, compare_before_after, ingest_local, merge
from refmatch.core import (
    Embedding,
    LabelCatalog,
    LibrarySnapshot,
    Provenance,
    ReferenceItem,
    normalize,
)
from refmatch.errors import (
    DimMismatch,
    EmptyEvaluation,
    EmptyManifest,
    IdCollision,
    UnknownLabel,
)
from refmatch.index import build_index, search
from conftest import make_clustered, make_items, make_snapshot, unit_rows


def write_manifest_lines(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))


def test_ingest_local_basic(tmp_path, rs):
    base = make_snapshot(rs, n=10, dim=4, n_classes=2)
    manifest = tmp_path / "local.jsonl"
    write_manifest_lines(
        manifest,
        [
            {"label": "class_0", "vector": [1.0, 0.0, 0.0, 0.0]},
            {"label": "class_1", "vector": [0.0, 2.0, 0.0, 0.0]},
            {"label": "class_1", "vector": [3.0, 4.0, 0.0, 0.0]},
            {"label": "class_0", "vector": [0.0, 0.0, 1.0, 1.0]},
        ],
    )
    items = ingest_local(manifest, base.catalog, "site-3", base)
    assert len(items) == 4
    assert all(i.provenance == Provenance.LOCAL for i in items)
    assert all(i.source_tag == "site-3" for i in items)
    assert min(i.item_id for i in items) == base.next_item_id()
    assert abs(np.linalg.norm(items[2].embedding.values.astype(np.float64)) - 1) < 1e-6


def test_ingest_local_rejects_unknown_label_and_empty(tmp_path, rs):
    base = make_snapshot(rs, n=4, dim=4, n_classes=2)
    manifest = tmp_path / "bad.jsonl"
    write_manifest_lines(manifest, [{"label": "melanoma", "vector": [1, 0, 0, 0]}])
    with pytest.raises(UnknownLabel):
        ingest_local(manifest, base.catalog, "s", base)
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(EmptyManifest):
        ingest_local(empty, base.catalog, "s", base)
    unlabeled = tmp_path / "unlabeled.jsonl"
    write_manifest_lines(unlabeled, [{"label": None, "vector": [1, 0, 0, 0]}])
    with pytest.raises(UnknownLabel):
        ingest_local(unlabeled, base.catalog, "s", base)


def test_merge_cardinality_and_generation(rs):
    base = make_snapshot(rs, n=100, dim=8, n_classes=3, generation=2)
    local = make_items(
        rs, 25, 8, 3, provenance=Provenance.LOCAL,
        id_start=base.next_item_id(), source_tag="site-1",
    )
    merged = merge(base, local)
    assert len(merged) == 125
    assert merged.generation == 3
    assert int((merged.provenance == Provenance.BASE).sum()) == 100
    assert int((merged.provenance == Provenance.LOCAL).sum()) == 25
    assert merged.catalog == base.catalog


def test_merge_empty_local_bumps_generation(rs):
    base = make_snapshot(rs, n=10, dim=4, n_classes=2, generation=0)
    merged = merge(base, [])
    assert len(merged) == 10
    assert merged.generation == 1
    assert np.array_equal(merged.vectors, base.vectors)


def test_merge_rejects_collisions_and_dim(rs):
    base = make_snapshot(rs, n=10, dim=4, n_classes=2)
    colliding = [
        ReferenceItem(
            int(base.item_ids[0]),
            Embedding(base.vectors[0], normalized=True),
            0,
            Provenance.LOCAL,
        )
    ]
    with pytest.raises(IdCollision):
        merge(base, colliding)
    wrong_dim = make_items(rs, 1, 8, 2, id_start=10_000)
    with pytest.raises(DimMismatch):
        merge(base, wrong_dim)


def test_merge_leaves_base_untouched(rs):
    base = make_snapshot(rs, n=50, dim=8, n_classes=3)
    base_index = build_index(base)
    query = Embedding(unit_rows(rs, 1, 8)[0], normalized=True)
    before_ids = search(base_index, query, 10).ids()
    before_bytes = base.vectors.tobytes()
    local = make_items(
        rs, 20, 8, 3, provenance=Provenance.LOCAL, id_start=base.next_item_id()
    )
    merge(base, local)
    assert base.vectors.tobytes() == before_bytes
    assert search(base_index, query, 10).ids() == before_ids
    assert len(base) == 50


def test_merged_local_item_self_match(rs):
    base = make_snapshot(rs, n=30, dim=8, n_classes=3)
    local = make_items(
        rs, 5, 8, 3, provenance=Provenance.LOCAL, id_start=base.next_item_id()
    )
    merged = merge(base, local)
    index = build_index(merged)
    hits = search(index, local[2].embedding, 1)
    assert hits[0].item_id == local[2].item_id
    assert hits[0].provenance == Provenance.LOCAL
    assert abs(hits[0].score - 1.0) <= 1e-6


def test_site_registry_tracks_counts(rs):
    base = make_snapshot(rs, n=10, dim=4, n_classes=2)
    local = make_items(
        rs, 4, 4, 2, provenance=Provenance.LOCAL,
        id_start=base.next_item_id(), source_tag="site-9",
    )
    merged = merge(base, local)
    registry = SiteRegistry.from_snapshot(merged)
    assert registry.sites["site-9"].items == 4
    registry.record_merge("site-9", 2, merged.generation + 1)
    assert registry.sites["site-9"].items == 6
    assert registry.to_json()["sites"]["site-9"]["items"] == 6


def test_compare_before_after_improves_under_shift(rs):
    snap, centroids = make_clustered(rs, n_classes=3, per_class=40, dim=16, sigma=0.1)
    offset = rs.standard_normal(16)
    offset *= 0.8 / np.linalg.norm(offset)
    shifted_queries = []
    truths = []
    local_items = []
    next_id = snap.next_item_id()
    for c in range(3):
        for _ in range(25):
            truths.append(c)
            shifted_queries.append(
                normalize(centroids[c] + offset + 0.1 * rs.standard_normal(16))
            )
        for _ in range(30):
            local_items.append(
                ReferenceItem(
                    next_id,
                    normalize(centroids[c] + offset + 0.1 * rs.standard_normal(16)),
                    c,
                    Provenance.LOCAL,
                    "shifted-site",
                )
            )
            next_id += 1
    merged = merge(snap, local_items)
    before, after = compare_before_after(
        build_index(snap), build_index(merged), shifted_queries, truths, ks=[1, 3]
    )
    for k in (1, 3):
        assert after.top_k_accuracy[k] >= before.top_k_accuracy[k]


def test_compare_before_after_empty_queries(rs):
    snap = make_snapshot(rs, n=10, dim=4, n_classes=2)
    index = build_index(snap)
    with pytest.raises(EmptyEvaluation):
        compare_before_after(index, index, [], [], ks=[1])
