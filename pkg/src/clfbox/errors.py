"""Exception types shared across the package.

Every error carries a stable ``code`` (the class name) and an optional
``detail_path`` pointing at the offending field, so the service layer can
serialize failures as ``{code, message, detail_path}`` without per-endpoint
translation tables.
"""

from __future__ import annotations


class ClfboxError(Exception):
    """Base class for all errors raised by this package."""

    http_status = 400

    def __init__(self, message: str, detail_path: str | None = None):
        super().__init__(message)
        self.message = message
        self.detail_path = detail_path

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_payload(self) -> dict:
        return {"code": self.code, "message": self.message, "detail_path": self.detail_path}


class MissingFile(ClfboxError):
    http_status = 404


class SchemaViolation(ClfboxError):
    pass


class LabelOutOfVocabulary(ClfboxError):
    pass


class LengthMismatch(ClfboxError):
    pass


class DuplicateInstanceId(ClfboxError):
    pass


class UnknownClassifier(ClfboxError):
    pass


class UnknownFeature(ClfboxError):
    pass


class UnknownLabel(ClfboxError):
    pass


class UniverseMismatch(ClfboxError):
    pass


class InvalidQuery(ClfboxError):
    """Structurally broken query (range on a categorical feature, k > m, ...)."""


class QueryParseError(ClfboxError):
    pass


class IndexOutOfRange(ClfboxError):
    pass


class MissingSelection(ClfboxError):
    pass


class NonDecomposableMetric(ClfboxError):
    """The requested metric is not a ratio of subset counts, so no boxes exist."""


class TooFewClassifiers(ClfboxError):
    pass


class InvalidPage(ClfboxError):
    pass


class UnknownDataset(ClfboxError):
    http_status = 404


class UnknownSession(ClfboxError):
    http_status = 404


class UnknownView(ClfboxError):
    http_status = 404


class ScriptError(ClfboxError):
    """Wraps the first failing action of a selection script with its step index."""

    def __init__(self, step: int, line: str, cause: Exception):
        super().__init__(f"step {step} ({line!r}): {cause}")
        self.step = step
        self.line = line
        self.cause = cause
