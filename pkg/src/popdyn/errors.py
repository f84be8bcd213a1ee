"""Exception types shared across the package."""

__all__ = ["DataError", "NumericalError", "ModelFormatError"]


class DataError(Exception):
    """Input data violates a contract (bad records, failed filters, schema)."""


class ModelFormatError(DataError):
    """A model or checkpoint document is malformed; message carries location."""


class NumericalError(Exception):
    """A computation produced non-finite values or diverged."""
