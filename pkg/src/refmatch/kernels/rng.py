"""Counter-based randomness for ensemble masking.

Masks must be reproducible per (seed, pass, item) no matter which
backend runs or in what order items are processed, so keys come from
the splitmix64 finalizer instead of a stateful generator.  Both
backends reimplement the same integer recipe; tests assert bitwise
agreement.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB

# A degenerate mask (all coordinates zeroed) is retried on a fresh
# substream at most this many times before giving up.
RETRY_LIMIT = 8

# Survivor mass below this is treated as "everything masked": the
# rescaled vector cannot be renormalized meaningfully.
NORM2_FLOOR = 1e-24


def mix64(x: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    x = (x + GOLDEN) & MASK64
    x ^= x >> 30
    x = (x * MIX_A) & MASK64
    x ^= x >> 27
    x = (x * MIX_B) & MASK64
    return x ^ (x >> 31)


def substream_key(seed: int, pass_index: int, item_id: int) -> int:
    """Key for one item's mask in one ensemble pass."""
    k = mix64(seed & MASK64)
    k = mix64(k ^ (pass_index & MASK64))
    return k ^ (item_id & MASK64)


def attempt_key(key: int, attempt: int) -> int:
    """Retry substream: attempt 0 is the key itself."""
    if attempt == 0:
        return key & MASK64
    return mix64((key + attempt) & MASK64)


def coord_uniform(key: int, coord: int) -> float:
    """Uniform in [0, 1) for one coordinate, from the top 53 bits."""
    h = mix64((key ^ ((coord + 1) * GOLDEN)) & MASK64)
    return (h >> 11) * 2.0**-53


def item_keys(seed: int, pass_index: int, item_ids: np.ndarray) -> np.ndarray:
    """Vectorized substream_key over a uint64 id array."""
    k = mix64(mix64(seed & MASK64) ^ (pass_index & MASK64))
    return np.uint64(k) ^ item_ids.astype(np.uint64, copy=False)


def coord_uniforms(keys: np.ndarray, dim: int) -> np.ndarray:
    """Uniform matrix (len(keys), dim) matching coord_uniform bit for bit."""
    with np.errstate(over="ignore"):
        j = np.arange(1, dim + 1, dtype=np.uint64) * np.uint64(GOLDEN)
        x = keys[:, None] ^ j[None, :]
        x = x + np.uint64(GOLDEN)
        x ^= x >> np.uint64(30)
        x = x * np.uint64(MIX_A)
        x ^= x >> np.uint64(27)
        x = x * np.uint64(MIX_B)
        x ^= x >> np.uint64(31)
    return (x >> np.uint64(11)).astype(np.float64) * 2.0**-53
