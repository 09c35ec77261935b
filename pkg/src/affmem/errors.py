"""Exception types shared across the package."""

from __future__ import annotations


class AffmemError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(AffmemError):
    """Two embeddings with different dimensions were compared."""


class DegenerateVectorError(AffmemError):
    """A zero-norm vector was used where a direction is required."""


class StructureError(AffmemError):
    """A memory or node violates a structural invariant.

    Carries the list of Violation records produced by validate_memory
    when the error originates from a validation pass.
    """

    def __init__(self, message: str, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class EmptyInputError(AffmemError):
    """An operation that needs at least one element received none."""


class EmptyCandidateSetError(AffmemError):
    """Score fusion was asked to rank an empty candidate set."""


class BuildError(AffmemError):
    """Memory construction failed. ``failed_view_ids`` lists the views
    whose processing raised, empty when the failure is not view-specific."""

    def __init__(self, message: str, failed_view_ids=()):
        super().__init__(message)
        self.failed_view_ids = list(failed_view_ids)


class FormatError(AffmemError):
    """A persisted file does not parse or declares the wrong schema."""


class ConfigError(AffmemError):
    """Invalid configuration, command usage, or benchmark setup."""


class DecompositionError(AffmemError):
    """An instruction could not be split into target and receptacle."""


class ProviderError(AffmemError):
    """A model backend failed. ``kind`` names the failure class."""

    EMPTY_INPUT = "empty-input"
    MISSING_PRECOMPUTED = "missing-precomputed"
    UNSUPPORTED_OPERATION = "unsupported-operation"
    PARSE_FAILURE = "parse-failure"
    SCORE_RANGE = "score-range"
    TIMEOUT = "timeout"
    TRANSPORT = "transport"
    AUTH = "auth"
    RATE_LIMIT = "rate-limit"

    def __init__(self, kind: str, message: str, payload=None):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        # raw backend payload retained for debugging parse failures
        self.payload = payload
