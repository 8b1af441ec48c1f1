"""Deterministic demo featurizer for raster images.

Stands in for a real encoder so the end-to-end surfaces can be driven
without one: 16x16 box statistics projected to the library dimension
by a fixed seeded random matrix.  Production deployments are expected
to post precomputed vectors instead.
"""
from __future__ import annotations

import io
from functools import lru_cache

import numpy as np

from .core import Embedding, normalize
from .errors import TooSmall, UndecodableImage

GRID = 16
RAW_DIM = GRID * GRID * 3 * 2
MIN_SIDE = 32
_PROJECTION_SEED = 0x5EED


@lru_cache(maxsize=8)
def _projection(dim: int) -> np.ndarray:
    gen = np.random.default_rng(_PROJECTION_SEED)
    return gen.standard_normal((RAW_DIM, dim)) / np.sqrt(RAW_DIM)


def decode_image(data: bytes) -> np.ndarray:
    """Bytes -> RGB uint8 array via Pillow."""
    try:
        from PIL import Image

        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except Exception as exc:
        raise UndecodableImage(f"cannot decode image: {exc}") from exc


def toy_featurize(image: np.ndarray, dim: int) -> Embedding:
    """Box-average the image onto a 16x16 grid, take per-cell
    per-channel mean and standard deviation, project to dim, normalize.

    Identical images produce identical embeddings bit for bit.
    """
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise UndecodableImage(f"expected an RGB raster, got shape {arr.shape}")
    height, width = arr.shape[:2]
    if height < MIN_SIDE or width < MIN_SIDE:
        raise TooSmall(f"image {width}x{height} below {MIN_SIDE}x{MIN_SIDE}")
    arr = arr.astype(np.float64)

    means = np.empty((GRID, GRID, 3), dtype=np.float64)
    stds = np.empty((GRID, GRID, 3), dtype=np.float64)
    row_edges = [(a * height) // GRID for a in range(GRID + 1)]
    col_edges = [(b * width) // GRID for b in range(GRID + 1)]
    for a in range(GRID):
        for b in range(GRID):
            cell = arr[row_edges[a] : row_edges[a + 1], col_edges[b] : col_edges[b + 1]]
            means[a, b] = cell.mean(axis=(0, 1))
            stds[a, b] = cell.std(axis=(0, 1))
    raw = np.concatenate([means.ravel(), stds.ravel()])
    return normalize(raw @ _projection(dim))
