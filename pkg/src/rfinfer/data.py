"""Dataset container, CSV ingestion, and training-data transformations.

A :class:`Dataset` is an immutable rectangular table: an ``(n, p)`` float
matrix of feature cells (categorical cells hold level codes), a numeric
response vector, and per-column kind metadata.  All transformations
(permutation, dropping, noise augmentation) allocate new datasets; nothing
is mutated in place, so datasets are safe to share across workers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateNameError,
    EmptyFileError,
    FeatureIndexError,
    MissingValueError,
    NonNumericError,
    SchemaError,
    StrataMismatchError,
    SubsampleSizeError,
)
from .utils import TAG_PERMUTE, TAG_STRATA, TAG_SUBSAMPLE, freeze, rng_at

NUMERIC = "numeric"
CATEGORICAL = "categorical"

# Categorical columns with more levels than this are split by
# ordered-by-mean-response prefixes instead of subset enumeration.
MAX_ENUM_LEVELS = 12


@dataclass(frozen=True)
class Dataset:
    """Immutable feature table with a numeric response.

    ``X[i, j]`` is a float for numeric columns and a level code (stored as
    a float integer) for categorical ones.  ``levels[j]`` lists the level
    labels for categorical column ``j`` in first-appearance order, and is
    ``None`` for numeric columns.
    """

    X: np.ndarray
    y: np.ndarray
    kinds: tuple[str, ...]
    levels: tuple[tuple[str, ...] | None, ...]
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be 2-dimensional")
        if y.shape != (X.shape[0],):
            raise ValueError("response length must equal the row count")
        if len(self.kinds) != X.shape[1] or len(self.levels) != X.shape[1]:
            raise ValueError("kinds/levels must have one entry per feature column")
        if len(self.names) != X.shape[1]:
            raise ValueError("names must have one entry per feature column")
        if len(set(self.names)) != len(self.names):
            raise DuplicateNameError("feature names are not unique")
        for j, kind in enumerate(self.kinds):
            col = X[:, j]
            if kind == NUMERIC:
                if self.levels[j] is not None:
                    raise ValueError(f"numeric column {j} must not carry levels")
                if col.size and not np.all(np.isfinite(col)):
                    raise ValueError(f"non-finite value in numeric column {j}")
            elif kind == CATEGORICAL:
                lv = self.levels[j]
                if lv is None:
                    raise ValueError(f"categorical column {j} must carry levels")
                if col.size:
                    codes = col.astype(np.int64)
                    if np.any(codes != col) or codes.min() < 0 or codes.max() >= len(lv):
                        raise ValueError(f"categorical codes out of range in column {j}")
            else:
                raise ValueError(f"unknown column kind {kind!r}")
        if y.size and not np.all(np.isfinite(y)):
            raise ValueError("non-finite response value")
        object.__setattr__(self, "X", freeze(X))
        object.__setattr__(self, "y", freeze(y))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def feature_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise FeatureIndexError(f"unknown feature {name!r}") from None

    def replace_columns(self, X: np.ndarray) -> "Dataset":
        """New dataset with the same schema and response but new cells."""
        return Dataset(X, self.y, self.kinds, self.levels, self.names)


@dataclass(frozen=True)
class StrataSpec:
    """Row-to-stratum assignment used by conditional permutation."""

    assignment: np.ndarray = field()

    def __post_init__(self) -> None:
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1:
            raise ValueError("stratum assignment must be one-dimensional")
        object.__setattr__(self, "assignment", freeze(a))

    @property
    def n(self) -> int:
        return self.assignment.shape[0]


def from_arrays(
    X: np.ndarray,
    y: np.ndarray,
    names: tuple[str, ...] | list[str] | None = None,
) -> Dataset:
    """All-numeric dataset straight from arrays (generators, tests)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    p = X.shape[1]
    if names is None:
        names = tuple(f"x{j + 1}" for j in range(p))
    return Dataset(X, np.asarray(y, dtype=np.float64), (NUMERIC,) * p, (None,) * p, tuple(names))


# ---------------------------------------------------------------- #
# CSV ingestion
# ---------------------------------------------------------------- #


def load_csv(path: str, schema: dict[str, str]) -> Dataset:
    """Read an RFC-4180 CSV into a Dataset using a column-role schema.

    ``schema`` maps column name to ``"numeric"``, ``"categorical"``, or
    ``"response"``; exactly one response column is required and every CSV
    column must be declared.  Categorical levels are coded by first
    appearance.  Missing or non-numeric cells fail loudly: there is no
    imputation.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if not rows:
        raise EmptyFileError(f"{path}: no data rows")
    if len(set(header)) != len(header):
        raise DuplicateNameError(f"{path}: duplicate column names in header")

    missing = [c for c in header if c not in schema]
    if missing:
        raise SchemaError(f"columns not declared in schema: {missing}")
    roles = [schema[c] for c in header]
    for c, role in zip(header, roles):
        if role not in (NUMERIC, CATEGORICAL, "response"):
            raise SchemaError(f"column {c!r} has unknown role {role!r}")
    response_cols = [i for i, role in enumerate(roles) if role == "response"]
    if len(response_cols) != 1:
        raise SchemaError(f"expected exactly one response column, found {len(response_cols)}")
    y_idx = response_cols[0]

    feat_idx = [i for i in range(len(header)) if i != y_idx]
    names = tuple(header[i] for i in feat_idx)
    kinds = tuple(roles[i] for i in feat_idx)

    n, p = len(rows), len(feat_idx)
    X = np.empty((n, p), dtype=np.float64)
    y = np.empty(n, dtype=np.float64)
    level_maps: list[dict[str, int] | None] = [
        {} if kind == CATEGORICAL else None for kind in kinds
    ]

    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise MissingValueError(r, header[min(len(row), len(header) - 1)])
        for out_j, in_i in enumerate(feat_idx):
            cell = row[in_i].strip()
            if cell == "":
                raise MissingValueError(r, header[in_i])
            if kinds[out_j] == NUMERIC:
                try:
                    value = float(cell)
                except ValueError:
                    raise NonNumericError(r, header[in_i], cell) from None
                if not math.isfinite(value):
                    raise NonNumericError(r, header[in_i], cell)
                X[r, out_j] = value
            else:
                table = level_maps[out_j]
                assert table is not None
                X[r, out_j] = table.setdefault(cell, len(table))
        resp = row[y_idx].strip()
        if resp == "":
            raise MissingValueError(r, header[y_idx])
        try:
            y[r] = float(resp)
        except ValueError:
            raise NonNumericError(r, header[y_idx], resp) from None
        if not math.isfinite(y[r]):
            raise NonNumericError(r, header[y_idx], resp)

    levels = tuple(
        tuple(table.keys()) if table is not None else None for table in level_maps
    )
    return Dataset(X, y, kinds, levels, names)


# ---------------------------------------------------------------- #
# Transformations
# ---------------------------------------------------------------- #


def _check_feature(ds: Dataset, j: int) -> None:
    if not 0 <= j < ds.p:
        raise FeatureIndexError(f"feature index {j} outside [0, {ds.p})")


def permute_feature(ds: Dataset, j: int, seed: int) -> Dataset:
    """Replace column ``j`` by a uniformly random permutation of itself."""
    _check_feature(ds, j)
    rng = rng_at(seed, TAG_PERMUTE, j)
    X = ds.X.copy()
    X[:, j] = X[rng.permutation(ds.n), j]
    return ds.replace_columns(X)


def permute_features_jointly(ds: Dataset, js: list[int], seed: int) -> Dataset:
    """Apply one shared row permutation to all columns in ``js``.

    Preserves the joint distribution of the permuted block while breaking
    its relation to the response and to the remaining columns.
    """
    for j in js:
        _check_feature(ds, j)
    rng = rng_at(seed, TAG_PERMUTE, *sorted(js))
    perm = rng.permutation(ds.n)
    X = ds.X.copy()
    for j in js:
        X[:, j] = X[perm, j]
    return ds.replace_columns(X)


def conditional_permute_feature(ds: Dataset, j: int, strata: StrataSpec, seed: int) -> Dataset:
    """Permute column ``j`` independently within each stratum.

    Rows never trade values across strata, so the permuted column keeps
    its within-stratum distribution — the stand-in used here for drawing
    a feature from its distribution given the other covariates.
    """
    _check_feature(ds, j)
    if strata.n != ds.n:
        raise StrataMismatchError(f"strata cover {strata.n} rows, dataset has {ds.n}")
    X = ds.X.copy()
    col = ds.X[:, j]
    for sid in np.unique(strata.assignment):
        rows = np.flatnonzero(strata.assignment == sid)
        rng = rng_at(seed, TAG_PERMUTE, j, int(sid))
        X[rows, j] = col[rows[rng.permutation(rows.size)]]
    return ds.replace_columns(X)


def drop_feature(ds: Dataset, j: int) -> Dataset:
    """Remove column ``j``; remaining columns keep their order."""
    _check_feature(ds, j)
    keep = [c for c in range(ds.p) if c != j]
    return Dataset(
        ds.X[:, keep],
        ds.y,
        tuple(ds.kinds[c] for c in keep),
        tuple(ds.levels[c] for c in keep),
        tuple(ds.names[c] for c in keep),
    )


def augment_noise(ds: Dataset, q: int, dist: str = "standard_gaussian", seed: int = 0) -> Dataset:
    """Append ``q`` pure-noise numeric columns named ``noise_1..noise_q``."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    if q == 0:
        return ds
    if dist == "standard_gaussian":
        noise = rng_at(seed, TAG_PERMUTE, ds.p).standard_normal((ds.n, q))
    elif dist == "uniform01":
        noise = rng_at(seed, TAG_PERMUTE, ds.p).random((ds.n, q))
    else:
        raise ValueError(f"unknown noise distribution {dist!r}")
    new_names = tuple(f"noise_{i + 1}" for i in range(q))
    if set(new_names) & set(ds.names):
        raise DuplicateNameError("noise column names collide with existing features")
    return Dataset(
        np.hstack([ds.X, noise]),
        ds.y,
        ds.kinds + (NUMERIC,) * q,
        ds.levels + (None,) * q,
        ds.names + new_names,
    )


def sample_indices(
    rng: np.random.Generator,
    n: int,
    k: int,
    with_replacement: bool,
    required: int | None = None,
) -> np.ndarray:
    """Core row-sampling routine drawing from an externally owned stream."""
    if k < 1 or (not with_replacement and k > n):
        raise SubsampleSizeError(f"k={k} invalid for n={n}")
    if required is not None and not 0 <= required < n:
        raise FeatureIndexError(f"required row {required} outside [0, {n})")
    if not with_replacement:
        if required is None:
            out = rng.choice(n, size=k, replace=False)
        else:
            rest = rng.choice(n - 1, size=k - 1, replace=False)
            rest = np.where(rest >= required, rest + 1, rest)
            out = np.concatenate([[required], rest])
        return np.sort(out).astype(np.int64)
    while True:
        out = rng.integers(0, n, size=k)
        if required is None or required in out:
            return np.sort(out).astype(np.int64)


def draw_subsample(
    n: int,
    k: int,
    with_replacement: bool,
    required: int | None = None,
    seed: int = 0,
    path: tuple[int, ...] = (),
) -> np.ndarray:
    """Draw a size-``k`` row sample, optionally forced to contain one row.

    Without replacement the result is a uniform k-subset (sorted); with
    replacement it is a uniform k-sequence, reported sorted.  When
    ``required`` is set, the draw is uniform over samples containing that
    row at least once (rejection sampling in the with-replacement case).
    """
    return sample_indices(rng_at(seed, TAG_SUBSAMPLE, *path), n, k, with_replacement, required)


# ---------------------------------------------------------------- #
# Default strata for conditional permutation
# ---------------------------------------------------------------- #


def _design_matrix(ds: Dataset, exclude: int) -> np.ndarray:
    """Standardized numeric + one-hot categorical matrix over X_{-exclude}."""
    cols: list[np.ndarray] = []
    for j in range(ds.p):
        if j == exclude:
            continue
        col = ds.X[:, j]
        if ds.kinds[j] == NUMERIC:
            sd = col.std()
            mu = col.mean()
            cols.append((col - mu) / sd if sd > 0 else np.zeros_like(col))
        else:
            levels = ds.levels[j]
            assert levels is not None
            codes = col.astype(np.int64)
            onehot = np.zeros((ds.n, len(levels)))
            onehot[np.arange(ds.n), codes] = 1.0
            cols.append(onehot)
    if not cols:
        return np.zeros((ds.n, 1))
    return np.column_stack(cols)


def default_strata(ds: Dataset, j: int, seed: int, n_strata: int | None = None) -> StrataSpec:
    """Cluster the remaining features into ``ceil(sqrt(n))`` strata.

    Plain Lloyd iterations with seeded initial centroids; deterministic
    given ``(ds, j, seed)``.  Serves as the pluggable default for
    conditional permutation — callers with a better conditional model can
    pass their own :class:`StrataSpec`.
    """
    _check_feature(ds, j)
    Z = _design_matrix(ds, exclude=j)
    n = ds.n
    k = n_strata if n_strata is not None else math.isqrt(n - 1) + 1
    k = max(1, min(k, n))
    rng = rng_at(seed, TAG_STRATA, j)
    centers = Z[rng.choice(n, size=k, replace=False)].copy()
    assign = np.zeros(n, dtype=np.int64)
    z_sq = (Z**2).sum(axis=1)
    for it in range(25):
        d2 = z_sq[:, None] - 2.0 * (Z @ centers.T) + (centers**2).sum(axis=1)[None, :]
        new_assign = d2.argmin(axis=1)
        if it > 0 and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = Z[assign == c]
            if members.size:
                centers[c] = members.mean(axis=0)
    return StrataSpec(assign)
