"""Exception hierarchy shared across the pipeline.

Every error carries a short machine-readable ``code`` that the HTTP gateway
maps onto a status code, so library callers and API clients see the same
taxonomy.
"""

from __future__ import annotations


class CfuQcError(Exception):
    """Base class for all pipeline errors."""

    code = "validation"

    def __init__(self, message: str, detail: dict | None = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}


class ValidationError(CfuQcError):
    code = "validation"


class UndefinedRateError(ValidationError):
    """A rate's denominator is empty (e.g. a class absent from labels)."""


class NotFoundError(CfuQcError):
    code = "not_found"


class ConflictError(CfuQcError):
    code = "conflict"


class IllegalTransitionError(CfuQcError):
    code = "illegal_transition"


class InsufficientDataError(CfuQcError):
    code = "insufficient_data"


class StorageError(CfuQcError):
    code = "storage"


# HTTP status for each error code, used by the gateway.
HTTP_STATUS = {
    "validation": 422,
    "not_found": 404,
    "conflict": 409,
    "illegal_transition": 409,
    "insufficient_data": 422,
    "storage": 500,
}
