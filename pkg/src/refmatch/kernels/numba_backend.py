"""Compiled implementations of the hot kernels.

Scan kernels run under fastmath (the f64 accumulations vectorize);
masking kernels do not, because their arithmetic must match the numpy
backend bit for bit.  All functions are cached to keep repeat startup
cheap.
"""
from __future__ import annotations

import numpy as np
from numba import get_num_threads, njit, prange

from ..errors import AllMasked
from . import rng

_U_GOLDEN = np.uint64(rng.GOLDEN)
_U_MIX_A = np.uint64(rng.MIX_A)
_U_MIX_B = np.uint64(rng.MIX_B)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_TWO_NEG53 = 2.0**-53
_RETRY_LIMIT = rng.RETRY_LIMIT
_NORM2_FLOOR = rng.NORM2_FLOOR
_LOWEST = np.finfo(np.float64).min


@njit(cache=True)
def _mix64(x):
    x = x + _U_GOLDEN
    x ^= x >> _U30
    x = x * _U_MIX_A
    x ^= x >> _U27
    x = x * _U_MIX_B
    return x ^ (x >> _U31)


@njit(cache=True)
def _coord_uniform(key, j):
    h = _mix64(key ^ ((np.uint64(j) + np.uint64(1)) * _U_GOLDEN))
    return np.float64(h >> _U11) * _TWO_NEG53


@njit(cache=True)
def _perturb_row(row, key, mask_rate, tmp, out_row):
    """Returns True on success, False when every attempt degenerated."""
    dim = row.shape[0]
    inv = 1.0 / (1.0 - mask_rate)
    for attempt in range(_RETRY_LIMIT + 1):
        if attempt == 0:
            ak = key
        else:
            ak = _mix64(key + np.uint64(attempt))
        acc = 0.0
        for j in range(dim):
            if _coord_uniform(ak, j) >= mask_rate:
                s = np.float64(row[j]) * inv
            else:
                s = 0.0
            tmp[j] = s
            acc += s * s
        if acc >= _NORM2_FLOOR:
            nrm = np.sqrt(acc)
            for j in range(dim):
                out_row[j] = np.float32(tmp[j] / nrm)
            return True
    return False


@njit(cache=True)
def _perturb_matrix(matrix, keys, mask_rate, out):
    """Returns the first failing row index, or -1 when all rows succeed."""
    tmp = np.empty(matrix.shape[1], dtype=np.float64)
    for i in range(matrix.shape[0]):
        if not _perturb_row(matrix[i], keys[i], mask_rate, tmp, out[i]):
            return i
    return -1


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
    bad = _perturb_matrix(matrix, keys, mask_rate, out)
    if bad >= 0:
        raise AllMasked(
            f"mask left no usable coordinates for item {int(item_ids[bad])} "
            f"after {rng.RETRY_LIMIT} retries",
            {"item_id": int(item_ids[bad]), "mask_rate": mask_rate},
        )
    return out


def perturb_vector(vec: np.ndarray, key: int, mask_rate: float) -> np.ndarray:
    """Single-row variant used by the public perturbation op."""
    if mask_rate == 0.0:
        return vec.copy()
    out = np.empty_like(vec)
    tmp = np.empty(vec.shape[0], dtype=np.float64)
    ok = _perturb_row(vec, np.uint64(key), mask_rate, tmp, out)
    if not ok:
        raise AllMasked(
            f"mask left no usable coordinates after {rng.RETRY_LIMIT} retries",
            {"item_id": -1, "mask_rate": mask_rate},
        )
    return out


@njit(cache=True)
def _heap_worse(s1, id1, s2, id2):
    """True when (s1, id1) ranks below (s2, id2): lower score, or tied
    score with the larger item id."""
    return s1 < s2 or (s1 == s2 and id1 > id2)


@njit(cache=True, fastmath=True)
def _topk_serial(matrix, item_ids, query, k):
    n, dim = matrix.shape
    m = min(k, n)
    h_score = np.full(m, _LOWEST, dtype=np.float64)
    h_id = np.zeros(m, dtype=np.uint64)
    h_row = np.full(m, -1, dtype=np.int64)
    count = 0
    for i in range(n):
        acc = 0.0
        for j in range(dim):
            acc += np.float64(matrix[i, j]) * query[j]
        iid = item_ids[i]
        if count < m:
            pos = count
            h_score[pos] = acc
            h_id[pos] = iid
            h_row[pos] = i
            count += 1
            while pos > 0:
                parent = (pos - 1) // 2
                if _heap_worse(h_score[pos], h_id[pos], h_score[parent], h_id[parent]):
                    h_score[pos], h_score[parent] = h_score[parent], h_score[pos]
                    h_id[pos], h_id[parent] = h_id[parent], h_id[pos]
                    h_row[pos], h_row[parent] = h_row[parent], h_row[pos]
                    pos = parent
                else:
                    break
        elif _heap_worse(h_score[0], h_id[0], acc, iid):
            h_score[0] = acc
            h_id[0] = iid
            h_row[0] = i
            pos = 0
            while True:
                left = 2 * pos + 1
                if left >= m:
                    break
                right = left + 1
                child = left
                if right < m and _heap_worse(
                    h_score[right], h_id[right], h_score[left], h_id[left]
                ):
                    child = right
                if _heap_worse(h_score[child], h_id[child], h_score[pos], h_id[pos]):
                    h_score[pos], h_score[child] = h_score[child], h_score[pos]
                    h_id[pos], h_id[child] = h_id[child], h_id[pos]
                    h_row[pos], h_row[child] = h_row[child], h_row[pos]
                    pos = child
                else:
                    break
    out_rows = np.empty(m, dtype=np.int64)
    out_scores = np.empty(m, dtype=np.float64)
    size = m
    for t in range(m - 1, -1, -1):
        out_rows[t] = h_row[0]
        out_scores[t] = h_score[0]
        size -= 1
        h_score[0] = h_score[size]
        h_id[0] = h_id[size]
        h_row[0] = h_row[size]
        pos = 0
        while True:
            left = 2 * pos + 1
            if left >= size:
                break
            right = left + 1
            child = left
            if right < size and _heap_worse(
                h_score[right], h_id[right], h_score[left], h_id[left]
            ):
                child = right
            if _heap_worse(h_score[child], h_id[child], h_score[pos], h_id[pos]):
                h_score[pos], h_score[child] = h_score[child], h_score[pos]
                h_id[pos], h_id[child] = h_id[child], h_id[pos]
                h_row[pos], h_row[child] = h_row[child], h_row[pos]
                pos = child
            else:
                break
    return out_rows, out_scores


@njit(cache=True, parallel=True)
def _topk_chunks(matrix, item_ids, query, k, nchunks):
    """Per-chunk exact top-k; chunks reuse the sequential kernel so a
    row's score does not depend on the partition."""
    n = matrix.shape[0]
    m = min(k, n)
    out_rows = np.full((nchunks, m), -1, dtype=np.int64)
    out_ids = np.zeros((nchunks, m), dtype=np.uint64)
    out_scores = np.full((nchunks, m), _LOWEST, dtype=np.float64)
    for t in prange(nchunks):
        a = t * n // nchunks
        b = (t + 1) * n // nchunks
        if b > a:
            rows, scores = _topk_serial(matrix[a:b], item_ids[a:b], query, k)
            for x in range(rows.shape[0]):
                out_rows[t, x] = rows[x] + a
                out_ids[t, x] = item_ids[rows[x] + a]
                out_scores[t, x] = scores[x]
    return out_rows, out_ids, out_scores


@njit(cache=True, parallel=True)
def _batch_topk(matrix, item_ids, queries, k):
    q = queries.shape[0]
    m = min(k, matrix.shape[0])
    rows = np.empty((q, m), dtype=np.int64)
    scores = np.empty((q, m), dtype=np.float64)
    for qi in prange(q):
        r, s = _topk_serial(matrix, item_ids, queries[qi], k)
        rows[qi, :] = r
        scores[qi, :] = s
    return rows, scores


def topk(
    matrix: np.ndarray,
    item_ids: np.ndarray,
    query: np.ndarray,
    k: int,
    parallel: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact top-k rows by (dot score desc, item id asc)."""
    query64 = np.ascontiguousarray(query, dtype=np.float64)
    if not parallel:
        return _topk_serial(matrix, item_ids, query64, k)
    nchunks = max(get_num_threads(), 1)
    rows, ids, scores = _topk_chunks(matrix, item_ids, query64, k, nchunks)
    valid = rows >= 0
    cand_rows = rows[valid]
    cand_ids = ids[valid]
    cand_scores = scores[valid]
    order = np.lexsort((cand_ids, -cand_scores))[: min(k, matrix.shape[0])]
    return cand_rows[order], cand_scores[order]


def batch_topk(
    matrix: np.ndarray,
    item_ids: np.ndarray,
    queries: np.ndarray,
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    """topk for each query row; result arrays are (len(queries), m)."""
    queries64 = np.ascontiguousarray(queries, dtype=np.float64)
    return _batch_topk(matrix, item_ids, queries64, k)
