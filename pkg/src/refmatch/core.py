"""Core types and persistence for the reference library.

Library file layout (little-endian, magic "GRDL", version 1):

    header   4s magic | u16 version | u32 dim | u64 item count
    catalog  u32 class count, then per class: u16 id | u16 name len | name utf-8
    items    per item: u64 item id | i32 class id (-1 = unlabeled) |
             u8 provenance (0 base, 1 local) | u16 tag len | tag utf-8 |
             dim * f32 vector payload

Vectors are stored float32 and must arrive unit-normalized; score math
upstream accumulates in float64.  Loading renormalizes rows whose norm
drifted more than 1e-5 (strict mode raises instead).
"""
from __future__ import annotations

import enum
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BadMagic,
    CorruptRecord,
    DimMismatch,
    EmptyManifest,
    IdCollision,
    IoFailure,
    NonFinite,
    NormalizationDrift,
    NotNormalized,
    UnknownClassId,
    UnknownLabel,
    VersionMismatch,
    ZeroVector,
)

MAGIC = b"GRDL"
FORMAT_VERSION = 1
NORM_TOLERANCE = 1e-5
ZERO_NORM_FLOOR = 1e-12

_HEADER = struct.Struct("<4sHIQ")
_CATALOG_COUNT = struct.Struct("<I")
_CLASS_HEAD = struct.Struct("<HH")
_ITEM_HEAD = struct.Struct("<QiBH")

_ROW_CHUNK = 16384


class Provenance(enum.IntEnum):
    BASE = 0
    LOCAL = 1


@dataclass(frozen=True, eq=False)
class Embedding:
    """A single vector; float32 payload, validated finite."""

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float32)
        if arr.ndim != 1:
            raise DimMismatch(f"embedding must be 1-d, got shape {arr.shape}")
        if arr.shape[0] < 2:
            raise DimMismatch(f"embedding dim must be >= 2, got {arr.shape[0]}")
        if not np.isfinite(arr).all():
            raise NonFinite("embedding contains nan or inf")
        if self.normalized:
            norm = float(np.linalg.norm(arr.astype(np.float64)))
            if abs(norm - 1.0) > NORM_TOLERANCE:
                raise NotNormalized(f"norm {norm!r} outside 1 +/- {NORM_TOLERANCE}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Embedding):
            return NotImplemented
        return self.normalized == other.normalized and np.array_equal(
            self.values, other.values
        )


def normalize(vector) -> Embedding:
    """Scale to unit length; raises ZeroVector below the 1e-12 floor."""
    values = vector.values if isinstance(vector, Embedding) else vector
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimMismatch(f"expected a 1-d vector, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise DimMismatch(f"vector dim must be >= 2, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise NonFinite("vector contains nan or inf")
    norm = float(np.linalg.norm(arr))
    if norm < ZERO_NORM_FLOOR:
        raise ZeroVector(f"norm {norm!r} is below {ZERO_NORM_FLOOR}")
    return Embedding((arr / norm).astype(np.float32), normalized=True)


@dataclass(frozen=True)
class LabelClass:
    id: int
    name: str


@dataclass(frozen=True)
class LabelCatalog:
    """Bidirectional class id <-> name mapping; ids are 0..C-1."""

    classes: tuple[LabelClass, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        seen_ids: set[int] = set()
        seen_names: set[str] = set()
        for cls in self.classes:
            if not cls.name:
                raise UnknownLabel("class name must be non-empty")
            if cls.id in seen_ids:
                raise IdCollision(f"duplicate class id {cls.id}")
            if cls.name in seen_names:
                raise IdCollision(f"duplicate class name {cls.name!r}")
            seen_ids.add(cls.id)
            seen_names.add(cls.name)
        if seen_ids and seen_ids != set(range(len(self.classes))):
            raise UnknownClassId(
                f"class ids must be contiguous 0..{len(self.classes) - 1}"
            )

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "LabelCatalog":
        return cls(tuple(LabelClass(i, n) for i, n in enumerate(names)))

    @cached_property
    def _by_id(self) -> dict[int, str]:
        return {c.id: c.name for c in self.classes}

    @cached_property
    def _by_name(self) -> dict[str, int]:
        return {c.name: c.id for c in self.classes}

    def __len__(self) -> int:
        return len(self.classes)

    def __contains__(self, class_id: int) -> bool:
        return class_id in self._by_id

    def ids(self) -> list[int]:
        return [c.id for c in self.classes]

    def name_of(self, class_id: int) -> str:
        try:
            return self._by_id[class_id]
        except KeyError:
            raise UnknownClassId(f"class id {class_id} not in catalog") from None

    def id_of(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownLabel(f"label {name!r} not in catalog") from None

    def to_json(self) -> dict:
        return {"classes": [{"id": c.id, "name": c.name} for c in self.classes]}

    @classmethod
    def from_json(cls, payload: dict) -> "LabelCatalog":
        return cls(
            tuple(LabelClass(int(c["id"]), str(c["name"])) for c in payload["classes"])
        )


@dataclass(frozen=True)
class ReferenceItem:
    """One library entry; the embedding must already be normalized."""

    item_id: int
    embedding: Embedding
    class_id: int | None
    provenance: Provenance = Provenance.BASE
    source_tag: str = ""

    def __post_init__(self):
        if not 0 <= self.item_id < 2**64:
            raise CorruptRecord(f"item id {self.item_id} outside u64 range")
        if self.class_id is not None and not 0 <= self.class_id <= 0xFFFF:
            raise UnknownClassId(f"class id {self.class_id} outside u16 range")
        if not self.embedding.normalized:
            raise NotNormalized(f"item {self.item_id} embedding is not normalized")
        object.__setattr__(self, "provenance", Provenance(self.provenance))


def _row_norms(matrix: np.ndarray) -> np.ndarray:
    out = np.empty(matrix.shape[0], dtype=np.float64)
    for a in range(0, matrix.shape[0], _ROW_CHUNK):
        b = min(a + _ROW_CHUNK, matrix.shape[0])
        block = matrix[a:b].astype(np.float64)
        out[a:b] = np.sqrt(np.einsum("ij,ij->i", block, block))
    return out


@dataclass(frozen=True, eq=False)
class LibrarySnapshot:
    """Immutable columnar view of one library generation.

    class_ids uses -1 for unlabeled items; arrays are read-only so a
    snapshot can be shared across threads without copies.
    """

    generation: int
    catalog: LabelCatalog
    item_ids: np.ndarray
    class_ids: np.ndarray
    provenance: np.ndarray
    source_tags: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        ids = np.ascontiguousarray(self.item_ids, dtype=np.uint64)
        cls = np.ascontiguousarray(self.class_ids, dtype=np.int32)
        prov = np.ascontiguousarray(self.provenance, dtype=np.uint8)
        vecs = np.ascontiguousarray(self.vectors, dtype=np.float32)
        n = ids.shape[0]
        if vecs.ndim != 2:
            raise DimMismatch(f"vectors must be 2-d, got shape {vecs.shape}")
        if vecs.shape[1] < 2:
            raise DimMismatch(f"vector dim must be >= 2, got {vecs.shape[1]}")
        if cls.shape[0] != n or prov.shape[0] != n or vecs.shape[0] != n:
            raise CorruptRecord("column lengths disagree")
        if len(self.source_tags) != n:
            raise CorruptRecord("source_tags length disagrees with item count")
        if n and np.unique(ids).shape[0] != n:
            raise IdCollision("duplicate item ids in snapshot")
        if not np.isfinite(vecs).all():
            raise NonFinite("snapshot vectors contain nan or inf")
        known = np.array(sorted(self.catalog.ids()) or [-1], dtype=np.int32)
        labeled = cls[cls >= 0]
        if labeled.size and not np.isin(labeled, known).all():
            bad = labeled[~np.isin(labeled, known)][0]
            raise UnknownClassId(f"class id {int(bad)} not in catalog")
        if n and not np.isin(prov, (0, 1)).all():
            raise CorruptRecord("provenance byte outside {0, 1}")
        if n:
            drift = np.abs(_row_norms(vecs) - 1.0)
            worst = int(np.argmax(drift))
            if drift[worst] > NORM_TOLERANCE:
                raise NotNormalized(
                    f"row {worst} norm drifted {float(drift[worst]):.3g}"
                )
        for arr in (ids, cls, prov, vecs):
            arr.flags.writeable = False
        object.__setattr__(self, "item_ids", ids)
        object.__setattr__(self, "class_ids", cls)
        object.__setattr__(self, "provenance", prov)
        object.__setattr__(self, "source_tags", tuple(self.source_tags))
        object.__setattr__(self, "vectors", vecs)

    @classmethod
    def from_items(
        cls,
        items: Sequence[ReferenceItem],
        catalog: LabelCatalog,
        generation: int = 0,
    ) -> "LibrarySnapshot":
        dim = items[0].embedding.dim if items else 2
        vecs = np.empty((len(items), dim), dtype=np.float32)
        ids = np.empty(len(items), dtype=np.uint64)
        class_ids = np.empty(len(items), dtype=np.int32)
        prov = np.empty(len(items), dtype=np.uint8)
        for i, item in enumerate(items):
            if item.embedding.dim != dim:
                raise DimMismatch(
                    f"item {item.item_id} dim {item.embedding.dim} != {dim}"
                )
            vecs[i] = item.embedding.values
            ids[i] = item.item_id
            class_ids[i] = -1 if item.class_id is None else item.class_id
            prov[i] = int(item.provenance)
        return cls(
            generation=generation,
            catalog=catalog,
            item_ids=ids,
            class_ids=class_ids,
            provenance=prov,
            source_tags=tuple(item.source_tag for item in items),
            vectors=vecs,
        )

    def __len__(self) -> int:
        return int(self.item_ids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    @cached_property
    def _row_by_id(self) -> dict[int, int]:
        return {int(iid): row for row, iid in enumerate(self.item_ids)}

    def row_of(self, item_id: int) -> int:
        try:
            return self._row_by_id[item_id]
        except KeyError:
            raise CorruptRecord(f"item id {item_id} not in snapshot") from None

    def item(self, row: int) -> ReferenceItem:
        cid = int(self.class_ids[row])
        return ReferenceItem(
            item_id=int(self.item_ids[row]),
            embedding=Embedding(self.vectors[row], normalized=True),
            class_id=None if cid < 0 else cid,
            provenance=Provenance(int(self.provenance[row])),
            source_tag=self.source_tags[row],
        )

    def items(self) -> Iterator[ReferenceItem]:
        return (self.item(row) for row in range(len(self)))

    def next_item_id(self) -> int:
        return int(self.item_ids.max()) + 1 if len(self) else 0


def save_library(snapshot: LibrarySnapshot, path: str | os.PathLike) -> None:
    """Serialize a snapshot; writes via a temp file and atomic rename."""
    path = os.fspath(path)
    chunks: list[bytes] = [
        _HEADER.pack(MAGIC, FORMAT_VERSION, snapshot.dim, len(snapshot)),
        _CATALOG_COUNT.pack(len(snapshot.catalog)),
    ]
    for cls in snapshot.catalog.classes:
        name = cls.name.encode("utf-8")
        if len(name) > 0xFFFF:
            raise CorruptRecord(f"class name too long: {cls.name[:32]!r}...")
        chunks.append(_CLASS_HEAD.pack(cls.id, len(name)))
        chunks.append(name)
    tags = [tag.encode("utf-8") for tag in snapshot.source_tags]
    for row, tag in enumerate(tags):
        if len(tag) > 0xFFFF:
            raise CorruptRecord(f"source tag too long on row {row}")
        chunks.append(
            _ITEM_HEAD.pack(
                int(snapshot.item_ids[row]),
                int(snapshot.class_ids[row]),
                int(snapshot.provenance[row]),
                len(tag),
            )
        )
        chunks.append(tag)
        chunks.append(snapshot.vectors[row].tobytes())
    try:
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"".join(chunks))
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write library {path}: {exc}") from exc


def load_library(
    path: str | os.PathLike,
    expected_dim: int | None = None,
    strict: bool = False,
    generation: int = 0,
) -> LibrarySnapshot:
    """Parse a library file; see the module docstring for the layout."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read library {path}: {exc}") from exc

    if len(buf) < _HEADER.size:
        raise CorruptRecord(f"file too short for header: {len(buf)} bytes")
    magic, version, dim, count = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"expected version {FORMAT_VERSION}, got {version}")
    if dim < 2:
        raise CorruptRecord(f"dim field {dim} must be >= 2")
    if expected_dim is not None and dim != expected_dim:
        raise DimMismatch(f"library dim {dim} != expected {expected_dim}")

    offset = _HEADER.size

    def need(nbytes: int, what: str) -> None:
        if offset + nbytes > len(buf):
            raise CorruptRecord(f"truncated while reading {what} at offset {offset}")

    need(_CATALOG_COUNT.size, "catalog count")
    (n_classes,) = _CATALOG_COUNT.unpack_from(buf, offset)
    offset += _CATALOG_COUNT.size
    classes = []
    for _ in range(n_classes):
        need(_CLASS_HEAD.size, "catalog entry")
        cid, name_len = _CLASS_HEAD.unpack_from(buf, offset)
        offset += _CLASS_HEAD.size
        need(name_len, "catalog name")
        try:
            name = buf[offset : offset + name_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptRecord(f"undecodable class name at offset {offset}") from exc
        offset += name_len
        classes.append(LabelClass(cid, name))
    try:
        catalog = LabelCatalog(tuple(classes))
    except (IdCollision, UnknownClassId, UnknownLabel) as exc:
        raise CorruptRecord(f"invalid catalog block: {exc.message}") from exc

    ids = np.empty(count, dtype=np.uint64)
    class_ids = np.empty(count, dtype=np.int32)
    prov = np.empty(count, dtype=np.uint8)
    tags: list[str] = []
    vecs = np.empty((count, dim), dtype=np.float32)
    payload = dim * 4
    for row in range(count):
        need(_ITEM_HEAD.size, f"item {row} header")
        item_id, class_id, prov_byte, tag_len = _ITEM_HEAD.unpack_from(buf, offset)
        offset += _ITEM_HEAD.size
        need(tag_len + payload, f"item {row} body")
        try:
            tags.append(buf[offset : offset + tag_len].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise CorruptRecord(f"undecodable source tag on item {row}") from exc
        offset += tag_len
        vecs[row] = np.frombuffer(buf, dtype="<f4", count=dim, offset=offset)
        offset += payload
        if class_id < -1:
            raise CorruptRecord(f"item {row} class id {class_id} invalid")
        if class_id >= 0 and class_id not in catalog:
            raise UnknownClassId(f"item {row} class id {class_id} not in catalog")
        if prov_byte not in (0, 1):
            raise CorruptRecord(f"item {row} provenance byte {prov_byte} invalid")
        ids[row] = item_id
        class_ids[row] = class_id
        prov[row] = prov_byte
    if offset != len(buf):
        raise CorruptRecord(f"{len(buf) - offset} trailing bytes after last item")

    if count:
        norms = _row_norms(vecs)
        drift = np.abs(norms - 1.0)
        if (drift > NORM_TOLERANCE).any():
            if strict:
                worst = int(np.argmax(drift))
                raise NormalizationDrift(
                    f"row {worst} norm drifted {float(drift[worst]):.3g}"
                )
            rows = np.nonzero(drift > NORM_TOLERANCE)[0]
            vecs = vecs.copy()
            for row in rows:
                if norms[row] < ZERO_NORM_FLOOR:
                    raise CorruptRecord(f"item {row} vector has zero norm")
                vecs[row] = (vecs[row].astype(np.float64) / norms[row]).astype(
                    np.float32
                )

    return LibrarySnapshot(
        generation=generation,
        catalog=catalog,
        item_ids=ids,
        class_ids=class_ids,
        provenance=prov,
        source_tags=tuple(tags),
        vectors=vecs,
    )


@dataclass(frozen=True)
class ManifestRow:
    """One JSON line: {"id": int|null, "label": str|null, "source": str,
    "vector": [float, ...]}."""

    vector: tuple[float, ...]
    label: str | None = None
    id: int | None = None
    source: str = ""


def read_manifest(path: str | os.PathLike) -> list[ManifestRow]:
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc}") from exc
    rows: list[ManifestRow] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptRecord(f"manifest line {lineno}: invalid json: {exc}") from exc
        if not isinstance(obj, dict) or "vector" not in obj:
            raise CorruptRecord(f"manifest line {lineno}: missing vector field")
        vector = obj["vector"]
        if not isinstance(vector, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in vector
        ):
            raise CorruptRecord(f"manifest line {lineno}: vector must be numeric")
        label = obj.get("label")
        if label is not None and not isinstance(label, str):
            raise CorruptRecord(f"manifest line {lineno}: label must be string|null")
        row_id = obj.get("id")
        if row_id is not None and (not isinstance(row_id, int) or row_id < 0):
            raise CorruptRecord(f"manifest line {lineno}: id must be a non-negative int")
        source = obj.get("source", "")
        if not isinstance(source, str):
            raise CorruptRecord(f"manifest line {lineno}: source must be a string")
        rows.append(
            ManifestRow(vector=tuple(vector), label=label, id=row_id, source=source)
        )
    if not rows:
        raise EmptyManifest(f"manifest {path} has no rows")
    return rows


def write_manifest(rows: Iterable[ManifestRow], path: str | os.PathLike) -> None:
    path = os.fspath(path)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(
                    json.dumps(
                        {
                            "id": row.id,
                            "label": row.label,
                            "source": row.source,
                            "vector": list(row.vector),
                        }
                    )
                    + "\n"
                )
    except OSError as exc:
        raise IoFailure(f"cannot write manifest {path}: {exc}") from exc


def items_from_manifest(
    rows: Sequence[ManifestRow],
    catalog: LabelCatalog,
    dim: int,
    provenance: Provenance,
    id_start: int = 0,
    assign_ids: bool = True,
    source_default: str = "",
    allow_unlabeled: bool = True,
) -> list[ReferenceItem]:
    """Normalize manifest rows into ReferenceItems.

    With assign_ids, manifest ids are ignored and ids run upward from
    id_start, which is how local batches stay above base ids.
    """
    items: list[ReferenceItem] = []
    for i, row in enumerate(rows):
        if len(row.vector) != dim:
            raise DimMismatch(f"manifest row {i}: dim {len(row.vector)} != {dim}")
        if row.label is None:
            if not allow_unlabeled:
                raise UnknownLabel(f"manifest row {i}: label required")
            class_id = None
        else:
            class_id = catalog.id_of(row.label)
        try:
            emb = normalize(np.asarray(row.vector, dtype=np.float64))
        except (ZeroVector, NonFinite) as exc:
            exc.detail.setdefault("row", i)
            raise
        if assign_ids:
            item_id = id_start + i
        else:
            if row.id is None:
                raise CorruptRecord(f"manifest row {i}: id required")
            item_id = row.id
        items.append(
            ReferenceItem(
                item_id=item_id,
                embedding=emb,
                class_id=class_id,
                provenance=provenance,
                source_tag=row.source or source_default,
            )
        )
    return items
