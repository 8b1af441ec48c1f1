"""Error taxonomy shared by every layer of the engine.

Each error carries a stable ``code`` string so the CLI and the HTTP
service can emit the same machine-readable payload without mapping
tables of their own.
"""
from __future__ import annotations

from typing import Any


class EngineError(Exception):
    """Base class for all expected failures."""

    code = "ENGINE_ERROR"

    def __init__(self, message: str, detail: dict[str, Any] | None = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}

    def to_json(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "detail": self.detail}


# --- vector level ---

class ZeroVector(EngineError):
    code = "ZERO_VECTOR"


class NonFinite(EngineError):
    code = "NON_FINITE"


class NotNormalized(EngineError):
    code = "NOT_NORMALIZED"


class DimMismatch(EngineError):
    code = "DIM_MISMATCH"


# --- library files ---

class BadMagic(EngineError):
    code = "BAD_MAGIC"


class VersionMismatch(EngineError):
    code = "VERSION_MISMATCH"


class CorruptRecord(EngineError):
    code = "CORRUPT_RECORD"


class UnknownClassId(EngineError):
    code = "UNKNOWN_CLASS_ID"


class NormalizationDrift(EngineError):
    code = "NORMALIZATION_DRIFT"


class IoFailure(EngineError):
    code = "IO_FAILURE"


# --- search / aggregation ---

class EmptyLibrary(EngineError):
    code = "EMPTY_LIBRARY"


class UnlabeledHit(EngineError):
    code = "UNLABELED_HIT"


class EmptyHits(EngineError):
    code = "EMPTY_HITS"


# --- evaluation ---

class LengthMismatch(EngineError):
    code = "LENGTH_MISMATCH"


class EmptyEvaluation(EngineError):
    code = "EMPTY_EVALUATION"


# --- manifests / ingestion ---

class UnknownLabel(EngineError):
    code = "UNKNOWN_LABEL"


class EmptyManifest(EngineError):
    code = "EMPTY_MANIFEST"


class IdCollision(EngineError):
    code = "ID_COLLISION"


# --- ensemble confidence ---

class AllMasked(EngineError):
    code = "ALL_MASKED"


class EnsembleDegenerate(EngineError):
    code = "ENSEMBLE_DEGENERATE"


class OneClassOnly(EngineError):
    code = "ONE_CLASS_ONLY"


class EmptyCategory(EngineError):
    code = "EMPTY_CATEGORY"


# --- retrieval review ---

class IncompleteSheet(EngineError):
    code = "INCOMPLETE_SHEET"


# --- featurizer ---

class TooSmall(EngineError):
    code = "TOO_SMALL"


class UndecodableImage(EngineError):
    code = "UNDECODABLE_IMAGE"


# --- synthetic harness ---

class CentroidPlacementFailed(EngineError):
    code = "CENTROID_PLACEMENT_FAILED"


class UnknownExperiment(EngineError):
    code = "UNKNOWN_EXPERIMENT"


# --- configuration / service state ---

class BadRequest(EngineError):
    code = "BAD_REQUEST"


class ConfigError(EngineError):
    code = "CONFIG_ERROR"


class ThetaUnset(EngineError):
    code = "THETA_UNSET"


class CaseStoreUnset(EngineError):
    code = "CASE_STORE_UNSET"
