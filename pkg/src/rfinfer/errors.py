"""Exception types raised by the public API.

Everything derives from :class:`RfinferError` so callers (notably the
CLI) can separate domain failures from genuine bugs.
"""

from __future__ import annotations


class RfinferError(Exception):
    """Base class for all package errors."""


# ---------------------------------------------------------------- #
# Dataset construction and transformation
# ---------------------------------------------------------------- #


class EmptyFileError(RfinferError):
    """CSV file has no header or no data rows."""


class DuplicateNameError(RfinferError):
    """Two columns (or a generated column) share a name."""


class SchemaError(RfinferError):
    """Schema declaration does not match the CSV columns."""


class MissingValueError(RfinferError):
    def __init__(self, row: int, col: str):
        super().__init__(f"missing value at row {row}, column {col!r}")
        self.row = row
        self.col = col


class NonNumericError(RfinferError):
    def __init__(self, row: int, col: str, value: str):
        super().__init__(f"non-numeric value {value!r} at row {row}, column {col!r}")
        self.row = row
        self.col = col
        self.value = value


class FeatureIndexError(RfinferError, IndexError):
    """Feature index outside [0, p)."""


class StrataMismatchError(RfinferError):
    """Stratum assignment length differs from the dataset row count."""


class SubsampleSizeError(RfinferError):
    """Requested subsample size k is invalid for the population size."""


# ---------------------------------------------------------------- #
# Tree and forest fitting
# ---------------------------------------------------------------- #


class NoAdmissibleSplitError(RfinferError):
    """No (feature, threshold) pair satisfies the minimum-leaf constraint."""


class EmptyRowsError(RfinferError):
    """Tree fitting was given an empty row list."""


class ArityMismatchError(RfinferError):
    """Query point does not match the training feature count."""


class OobCoverageError(RfinferError):
    def __init__(self, row: int | None = None):
        detail = "no out-of-bag coverage"
        if row is not None:
            detail += f" for row {row}"
        super().__init__(detail)
        self.row = row


# ---------------------------------------------------------------- #
# Inference
# ---------------------------------------------------------------- #


class SchemeUnsupportedError(RfinferError):
    """Sampling scheme does not support grouped variance estimation."""


class GroupCountError(RfinferError):
    """Too few anchor groups (or trees per group) for covariance estimation."""


class LevelOutOfRangeError(RfinferError):
    """Confidence level outside the open interval (0, 1)."""


class DimensionMismatchError(RfinferError):
    """Difference vector and covariance matrix dimensions disagree."""


class ZeroCovarianceError(RfinferError):
    """Covariance matrix has no positive eigenvalue but the difference is nonzero."""


class GridTooSmallError(RfinferError):
    """Evaluation grid lacks the minimum number of levels or complement points."""


class EmptyEvalError(RfinferError):
    """Held-out evaluation dataset has no rows."""


# ---------------------------------------------------------------- #
# CLI
# ---------------------------------------------------------------- #


class UnknownFeatureError(RfinferError):
    """Feature name not present in the dataset."""


class UnknownScenarioError(RfinferError):
    """Simulation scenario name not recognized."""
