"""Synthetic labeled clusters on the unit sphere.

Centroids are seeded random unit vectors kept apart by a minimum
pairwise angle (rejection sampling); points are centroid + Gaussian
noise, renormalized. Everything is a pure function of the spec.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import ManifestRow
from ..errors import CentroidPlacementFailed

MAX_PLACEMENT_ATTEMPTS = 10_000


@dataclass(frozen=True)
class ClusterSpec:
    """Shape of one synthetic benchmark: class count, split sizes,
    dimensionality, centroid spacing and noise level."""

    n_classes: int = 11
    per_class_reference: int = 200
    per_class_query: int = 50
    dim: int = 512
    min_angle_deg: float = 45.0
    sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 1:
            raise ValueError(f"n_classes must be >= 1, got {self.n_classes}")
        if self.per_class_reference < 1:
            raise ValueError("per_class_reference must be >= 1")
        if self.per_class_query < 0:
            raise ValueError("per_class_query must be >= 0")
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if not 0.0 < self.min_angle_deg < 180.0:
            raise ValueError("min_angle_deg must be in (0, 180)")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


def class_names(n_classes: int) -> list[str]:
    return [f"class_{c:02d}" for c in range(n_classes)]


def place_centroids(
    rng: np.random.Generator,
    n: int,
    dim: int,
    min_angle_deg: float,
    avoid: np.ndarray | None = None,
) -> np.ndarray:
    """Unit vectors with pairwise angle >= min_angle_deg, also kept that
    far from every row of avoid; raises after a bounded attempt budget."""
    max_cos = math.cos(math.radians(min_angle_deg))
    rows: list[np.ndarray] = []
    existing = [] if avoid is None else [np.asarray(a, dtype=np.float64) for a in avoid]
    attempts = 0
    while len(rows) < n:
        attempts += 1
        if attempts > MAX_PLACEMENT_ATTEMPTS:
            raise CentroidPlacementFailed(
                f"placed {len(rows)}/{n} centroids in {MAX_PLACEMENT_ATTEMPTS} "
                f"attempts at min angle {min_angle_deg} deg, dim {dim}"
            )
        vec = rng.standard_normal(dim)
        vec /= np.linalg.norm(vec)
        if all(float(np.dot(vec, c)) <= max_cos for c in existing + rows):
            rows.append(vec)
    return np.stack(rows)


def sample_points(
    rng: np.random.Generator,
    centroid: np.ndarray,
    count: int,
    sigma: float,
    offset: np.ndarray | None = None,
) -> np.ndarray:
    """count unit rows around centroid (+ optional fixed offset)."""
    base = centroid if offset is None else centroid + offset
    pts = base[None, :] + sigma * rng.standard_normal((count, centroid.shape[0]))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return pts


def _rows_for(points: np.ndarray, label: str, source: str) -> list[ManifestRow]:
    return [
        ManifestRow(vector=tuple(float(x) for x in p), label=label, source=source)
        for p in points
    ]


def gen_clusters_with_centroids(
    spec: ClusterSpec,
) -> tuple[list[ManifestRow], list[ManifestRow], np.ndarray]:
    """gen_clusters plus the centroid matrix, for experiments that place
    offsets or extra clusters relative to it."""
    rng = np.random.default_rng(spec.seed)
    centroids = place_centroids(rng, spec.n_classes, spec.dim, spec.min_angle_deg)
    names = class_names(spec.n_classes)
    reference: list[ManifestRow] = []
    queries: list[ManifestRow] = []
    for c in range(spec.n_classes):
        ref_pts = sample_points(
            rng, centroids[c], spec.per_class_reference, spec.sigma
        )
        reference.extend(_rows_for(ref_pts, names[c], "synthetic"))
        query_pts = sample_points(rng, centroids[c], spec.per_class_query, spec.sigma)
        queries.extend(_rows_for(query_pts, names[c], "synthetic"))
    return reference, queries, centroids


def gen_clusters(
    spec: ClusterSpec,
) -> tuple[list[ManifestRow], list[ManifestRow]]:
    """Reference and query manifests for the spec; the query manifest
    carries truth labels. Identical specs produce identical rows."""
    reference, queries, _ = gen_clusters_with_centroids(spec)
    return reference, queries
