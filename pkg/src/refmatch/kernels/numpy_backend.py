"""Pure-numpy implementations of the hot kernels.

Selected with ENGINE_KERNEL=numpy, or automatically when the compiled
backend is unavailable.  Perturbation arithmetic is ordered so results
match the compiled backend bit for bit; top-k scoring may differ from
it in the last few ulps (BLAS reassociates sums), which never changes
the returned ids because ranking ties only occur between identical
rows.
"""
from __future__ import annotations

import numpy as np

from ..errors import AllMasked
from . import rng

_ROW_CHUNK = 16384


def _perturb_block(block64: np.ndarray, keys: np.ndarray, mask_rate: float):
    """One masking attempt for a block of rows; returns (scaled, norm2)."""
    inv = 1.0 / (1.0 - mask_rate)
    u = rng.coord_uniforms(keys, block64.shape[1])
    scaled = np.where(u >= mask_rate, block64 * inv, 0.0)
    norm2 = np.cumsum(scaled * scaled, axis=1)[:, -1]
    return scaled, norm2


def _retry_row(row64: np.ndarray, key: int, mask_rate: float, item_id: int) -> np.ndarray:
    for attempt in range(1, rng.RETRY_LIMIT + 1):
        ak = np.array([rng.attempt_key(key, attempt)], dtype=np.uint64)
        scaled, norm2 = _perturb_block(row64[None, :], ak, mask_rate)
        if norm2[0] >= rng.NORM2_FLOOR:
            return (scaled[0] / np.sqrt(norm2[0])).astype(np.float32)
    raise AllMasked(
        f"mask left no usable coordinates for item {item_id} "
        f"after {rng.RETRY_LIMIT} retries",
        {"item_id": int(item_id), "mask_rate": mask_rate},
    )


def perturb_matrix(
    matrix: np.ndarray,
    item_ids: np.ndarray,
    seed: int,
    pass_index: int,
    mask_rate: float,
) -> np.ndarray:
    """Mask, rescale and renormalize every row; mask_rate 0 is a copy."""
    if mask_rate == 0.0:
        return matrix.copy()
    keys = rng.item_keys(seed, pass_index, item_ids)
    out = np.empty_like(matrix)
    for a in range(0, matrix.shape[0], _ROW_CHUNK):
        b = min(a + _ROW_CHUNK, matrix.shape[0])
        block64 = matrix[a:b].astype(np.float64)
        scaled, norm2 = _perturb_block(block64, keys[a:b], mask_rate)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[a:b] = (scaled / np.sqrt(norm2)[:, None]).astype(np.float32)
        for local in np.nonzero(norm2 < rng.NORM2_FLOOR)[0]:
            i = a + int(local)
            out[i] = _retry_row(
                block64[local], int(keys[i]), mask_rate, int(item_ids[i])
            )
    return out


def perturb_vector(vec: np.ndarray, key: int, mask_rate: float) -> np.ndarray:
    """Single-row variant used by the public perturbation op."""
    if mask_rate == 0.0:
        return vec.copy()
    row64 = vec.astype(np.float64)
    keys = np.array([key], dtype=np.uint64)
    scaled, norm2 = _perturb_block(row64[None, :], keys, mask_rate)
    if norm2[0] >= rng.NORM2_FLOOR:
        return (scaled[0] / np.sqrt(norm2[0])).astype(np.float32)
    return _retry_row(row64, key, mask_rate, item_id=-1)


def _scores(matrix: np.ndarray, query64: np.ndarray) -> np.ndarray:
    out = np.empty(matrix.shape[0], dtype=np.float64)
    for a in range(0, matrix.shape[0], _ROW_CHUNK):
        b = min(a + _ROW_CHUNK, matrix.shape[0])
        out[a:b] = matrix[a:b].astype(np.float64) @ query64
    return out


def _select(scores: np.ndarray, item_ids: np.ndarray, k: int):
    order = np.lexsort((item_ids, -scores))[: min(k, scores.shape[0])]
    rows = order.astype(np.int64)
    return rows, scores[rows]


def topk(
    matrix: np.ndarray,
    item_ids: np.ndarray,
    query: np.ndarray,
    k: int,
    parallel: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact top-k rows by (dot score desc, item id asc).

    `parallel` is accepted for interface parity; this backend always
    runs the same sequential path.
    """
    query64 = np.ascontiguousarray(query, dtype=np.float64)
    return _select(_scores(matrix, query64), item_ids, k)


def batch_topk(
    matrix: np.ndarray,
    item_ids: np.ndarray,
    queries: np.ndarray,
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    """topk for each query row; result arrays are (len(queries), m)."""
    queries64 = np.ascontiguousarray(queries, dtype=np.float64)
    q = queries64.shape[0]
    m = min(k, matrix.shape[0])
    rows = np.empty((q, m), dtype=np.int64)
    scores = np.empty((q, m), dtype=np.float64)
    all_scores = np.empty((q, matrix.shape[0]), dtype=np.float64)
    for a in range(0, matrix.shape[0], _ROW_CHUNK):
        b = min(a + _ROW_CHUNK, matrix.shape[0])
        all_scores[:, a:b] = queries64 @ matrix[a:b].astype(np.float64).T
    for qi in range(q):
        rows[qi], scores[qi] = _select(all_scores[qi], item_ids, k)
    return rows, scores
