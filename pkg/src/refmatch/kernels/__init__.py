"""Kernel backend selection.

ENGINE_KERNEL picks the implementation at import time:

  auto   use the compiled backend, fall back to numpy (default)
  numba  require the compiled backend
  numpy  force the pure-numpy path

Both backends expose the same four operations and agree exactly on
returned ids; masking output is bit-identical.  set_backend() swaps at
runtime, which the benchmark script uses to compare the two.
"""
from __future__ import annotations

import os
from types import ModuleType

from ..errors import ConfigError
from . import rng

__all__ = [
    "backend_name",
    "set_backend",
    "perturb_matrix",
    "perturb_vector",
    "topk",
    "batch_topk",
    "rng",
]


def _load(name: str) -> ModuleType:
    if name == "numpy":
        from . import numpy_backend

        return numpy_backend
    if name == "numba":
        from . import numba_backend

        return numba_backend
    raise ConfigError(f"unknown kernel backend {name!r}, expected numba or numpy")


def _initial() -> tuple[str, ModuleType]:
    requested = os.environ.get("ENGINE_KERNEL", "auto").strip().lower() or "auto"
    if requested == "auto":
        try:
            return "numba", _load("numba")
        except ImportError:
            return "numpy", _load("numpy")
    if requested not in ("numba", "numpy"):
        raise ConfigError(
            f"ENGINE_KERNEL must be auto, numba or numpy, got {requested!r}"
        )
    return requested, _load(requested)


_name, _impl = _initial()


def backend_name() -> str:
    return _name


def set_backend(name: str) -> str:
    """Switch backends; returns the previous name."""
    global _name, _impl
    previous = _name
    _name, _impl = name, _load(name)
    return previous


def perturb_matrix(matrix, item_ids, seed, pass_index, mask_rate):
    return _impl.perturb_matrix(matrix, item_ids, seed, pass_index, mask_rate)


def perturb_vector(vec, key, mask_rate):
    return _impl.perturb_vector(vec, key, mask_rate)


def topk(matrix, item_ids, query, k, parallel=False):
    return _impl.topk(matrix, item_ids, query, k, parallel=parallel)


def batch_topk(matrix, item_ids, queries, k):
    return _impl.batch_topk(matrix, item_ids, queries, k)
