"""Exception hierarchy shared across the package.

Every error class carries a stable ``code`` string so the HTTP layer can
map any failure onto exactly one wire-level error code.
"""
from __future__ import annotations


class FaceOracleError(Exception):
    """Base class for all package errors."""

    code = "internal_error"


# --- image decoding and quality measures ---

class UnsupportedFormat(FaceOracleError):
    code = "unsupported_format"


class CorruptImage(FaceOracleError):
    code = "corrupt_image"


class InvalidAnnotation(FaceOracleError):
    code = "invalid_annotation"


class NoBackground(FaceOracleError):
    code = "no_background"


class EmptyComponents(FaceOracleError):
    code = "empty_components"


class UnknownMeasure(FaceOracleError):
    code = "unknown_measure"


class MeasureUnavailable(FaceOracleError):
    code = "measure_unavailable"


# --- corpus ingestion ---

class InvalidEncoding(FaceOracleError):
    code = "invalid_encoding"


class DuplicateDocId(FaceOracleError):
    code = "duplicate_doc_id"


class InvalidChunkParams(FaceOracleError):
    code = "invalid_chunk_params"


class ParseError(FaceOracleError):
    code = "parse_error"


# --- embedding and vector index ---

class ZeroVector(FaceOracleError):
    code = "zero_vector"


class DimensionMismatch(FaceOracleError):
    code = "dimension_mismatch"


# --- LLM gateway ---

class BackendUnavailable(FaceOracleError):
    code = "backend_unavailable"


class BackendTimeout(FaceOracleError):
    code = "backend_timeout"


# --- agent ---

class NoImageAttached(FaceOracleError):
    code = "no_image_attached"


# --- evaluation harness ---

class EmptyEvaluation(FaceOracleError):
    code = "empty_evaluation"


class NoImages(FaceOracleError):
    code = "no_images"


# --- service ---

class ValidationFailure(FaceOracleError):
    code = "validation_error"


class NotFoundError(FaceOracleError):
    code = "not_found"


class SessionNotFound(FaceOracleError):
    code = "session_not_found"


class SessionBusy(FaceOracleError):
    code = "session_busy"
