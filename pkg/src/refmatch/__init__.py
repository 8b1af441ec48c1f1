"""Training-free diagnosis by exact retrieval over a labeled library."""

__version__ = "0.1.0"

from .core import (
    Embedding,
    LabelCatalog,
    LibrarySnapshot,
    Provenance,
    ReferenceItem,
    load_library,
    normalize,
    save_library,
)
from .errors import EngineError

__all__ = [
    "Embedding",
    "EngineError",
    "LabelCatalog",
    "LibrarySnapshot",
    "Provenance",
    "ReferenceItem",
    "__version__",
    "load_library",
    "normalize",
    "save_library",
]
