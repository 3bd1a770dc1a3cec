"""Tree ensembles under bootstrap and subsample schemes.

A forest prediction is the plain arithmetic mean over its trees.  Per-tree
seeds derive from ``(master seed, tree index)``, so refitting with any
worker count reproduces the model bit for bit, and inference code can
force specific rows into specific trees' subsamples without disturbing
the rest of the randomness.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, sample_indices
from .errors import ArityMismatchError, OobCoverageError, SubsampleSizeError
from .tree import Tree, TreeParams, fit_tree, predict_rows, tree_from_dict, tree_to_dict
from .utils import TAG_TREE, chunk_indices, parallel_map, rng_at

BOOTSTRAP = "bootstrap"
SUBSAMPLE = "subsample"
SUBSAMPLE_WR = "subsample_with_replacement"
SCHEMES = (BOOTSTRAP, SUBSAMPLE, SUBSAMPLE_WR)


@dataclass(frozen=True)
class ForestParams:
    """Ensemble-level hyperparameters.

    ``k`` is the subsample size; ``None`` resolves to ``ceil(n / 2)`` for
    the subsample schemes and to ``n`` for the bootstrap (which forces
    ``k = n``).
    """

    B: int = 500
    k: int | None = None
    scheme: str = SUBSAMPLE
    tree: TreeParams = field(default_factory=TreeParams)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.B < 1:
            raise ValueError("B must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.k is not None and self.k < 1:
            raise SubsampleSizeError("k must be >= 1")

    def resolve_k(self, n: int) -> int:
        if self.scheme == BOOTSTRAP:
            if self.k is not None and self.k != n:
                raise SubsampleSizeError("bootstrap forces k = n")
            return n
        k = math.ceil(0.5 * n) if self.k is None else self.k
        if self.scheme == SUBSAMPLE and k > n:
            raise SubsampleSizeError(f"k={k} exceeds n={n} for sampling without replacement")
        return k

    def with_replacement(self) -> bool:
        return self.scheme in (BOOTSTRAP, SUBSAMPLE_WR)


@dataclass(frozen=True)
class ForestGroups:
    """Anchored-group layout used by the variance estimator.

    ``design`` is ``"half_sample"`` (each group's trees subsample from a
    shared half of the rows; ``anchors`` holds the pool seeds) or
    ``"row_anchor"`` (each group's trees are forced to contain one shared
    row; ``anchors`` holds those row indices).
    """

    n_z: int
    n_mc: int
    anchors: np.ndarray
    design: str = "half_sample"


@dataclass(eq=False)
class Forest:
    """Fitted ensemble plus the schema needed to query it."""

    trees: tuple[Tree, ...]
    params: ForestParams
    n_train: int
    feature_names: tuple[str, ...]
    kinds: tuple[str, ...]
    levels: tuple[tuple[str, ...] | None, ...]
    groups: ForestGroups | None = None

    @property
    def B(self) -> int:
        return len(self.trees)

    @property
    def p(self) -> int:
        return len(self.feature_names)


def _fit_block(args: tuple) -> list[Tree]:
    ds, params, k, indices, required, pools = args
    out = []
    for b in indices:
        # One stream per tree index covers both the subsample draw and the
        # in-tree randomness; worker count cannot shift it.
        rng = rng_at(params.seed, TAG_TREE, b)
        req = None if required is None else int(required[b])
        if pools is None:
            sample = sample_indices(rng, ds.n, k, params.with_replacement(), required=req)
        else:
            pool = pools[b]
            sample = pool[sample_indices(rng, pool.shape[0], k, params.with_replacement())]
            sample = np.sort(sample)
        out.append(fit_tree(ds, sample, params.tree, rng=rng))
    return out


def fit_forest(
    ds: Dataset,
    params: ForestParams,
    workers: int = 1,
    required_rows: np.ndarray | None = None,
    row_pools: list[np.ndarray] | None = None,
    groups: ForestGroups | None = None,
) -> Forest:
    """Fit ``params.B`` trees on independent draws from the chosen scheme.

    The grouped variance estimator threads either ``required_rows`` (one
    row per tree that its subsample must contain) or ``row_pools`` (one
    restricted row pool per tree to subsample from).  Models are
    bit-reproducible given ``(ds, params)`` for any worker count.
    """
    k = params.resolve_k(ds.n)
    if params.tree.mtry is not None:
        params.tree.resolve_mtry(ds.p)
    blocks = chunk_indices(params.B, workers if workers > 1 else 1)
    tasks = [(ds, params, k, list(block), required_rows, row_pools) for block in blocks]
    results = parallel_map(_fit_block, tasks, workers=workers)
    trees = tuple(t for block in results for t in block)
    return Forest(
        trees=trees,
        params=params,
        n_train=ds.n,
        feature_names=ds.names,
        kinds=ds.kinds,
        levels=ds.levels,
        groups=groups,
    )


# ---------------------------------------------------------------- #
# Prediction
# ---------------------------------------------------------------- #


def tree_matrix(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Per-tree predictions, shape ``(B, n_points)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != forest.p:
        raise ArityMismatchError(f"query has {X.shape[1]} features, forest expects {forest.p}")
    out = np.empty((forest.B, X.shape[0]))
    for b, tree in enumerate(forest.trees):
        out[b] = predict_rows(tree, X)
    return out


def predict_matrix(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Forest predictions (tree average) for the rows of ``X``."""
    return tree_matrix(forest, X).mean(axis=0)


def predict(forest: Forest, x: np.ndarray | list[float]) -> float:
    """Forest prediction at a single point."""
    return float(predict_matrix(forest, np.asarray(x, dtype=np.float64)[None, :])[0])


def inbag_matrix(forest: Forest) -> np.ndarray:
    """Boolean ``(B, n_train)`` matrix of in-sample membership."""
    out = np.zeros((forest.B, forest.n_train), dtype=bool)
    for b, tree in enumerate(forest.trees):
        out[b, tree.in_sample] = True
    return out


def oob_error(forest: Forest, ds: Dataset) -> float:
    """Mean squared error of out-of-bag predictions.

    Each row is predicted by averaging only the trees whose subsample did
    not contain it; raises :class:`OobCoverageError` naming the first row
    with no such tree.
    """
    if ds.n != forest.n_train:
        raise ArityMismatchError("dataset does not match the training row count")
    inbag = inbag_matrix(forest)
    oob = ~inbag
    coverage = oob.sum(axis=0)
    uncovered = np.flatnonzero(coverage == 0)
    if uncovered.size:
        raise OobCoverageError(int(uncovered[0]))
    preds = tree_matrix(forest, ds.X)
    oob_mean = (preds * oob).sum(axis=0) / coverage
    return float(np.mean((oob_mean - ds.y) ** 2))


# ---------------------------------------------------------------- #
# Persistence
# ---------------------------------------------------------------- #


def _params_to_dict(params: ForestParams) -> dict:
    return {
        "B": params.B,
        "k": params.k,
        "scheme": params.scheme,
        "seed": params.seed,
        "tree": {
            "max_depth": params.tree.max_depth,
            "min_leaf": params.tree.min_leaf,
            "mtry": params.tree.mtry,
            "random_split_prob": params.tree.random_split_prob,
            "honest": params.tree.honest,
            "seed": params.tree.seed,
        },
    }


def _params_from_dict(payload: dict) -> ForestParams:
    tree = payload["tree"]
    return ForestParams(
        B=payload["B"],
        k=payload["k"],
        scheme=payload["scheme"],
        seed=payload["seed"],
        tree=TreeParams(
            max_depth=tree["max_depth"],
            min_leaf=tree["min_leaf"],
            mtry=tree["mtry"],
            random_split_prob=tree["random_split_prob"],
            honest=tree["honest"],
            seed=tree["seed"],
        ),
    )


def forest_to_dict(forest: Forest) -> dict:
    out = {
        "params": _params_to_dict(forest.params),
        "n_train": forest.n_train,
        "schema": {
            "feature_names": list(forest.feature_names),
            "kinds": list(forest.kinds),
            "levels": [list(lv) if lv is not None else None for lv in forest.levels],
        },
        "trees": [tree_to_dict(t) for t in forest.trees],
    }
    if forest.groups is not None:
        out["groups"] = {
            "n_z": forest.groups.n_z,
            "n_mc": forest.groups.n_mc,
            "anchors": forest.groups.anchors.tolist(),
            "design": forest.groups.design,
        }
    return out


def forest_from_dict(payload: dict) -> Forest:
    schema = payload["schema"]
    groups = None
    if "groups" in payload:
        groups = ForestGroups(
            n_z=payload["groups"]["n_z"],
            n_mc=payload["groups"]["n_mc"],
            anchors=np.asarray(payload["groups"]["anchors"], dtype=np.int64),
        )
    return Forest(
        trees=tuple(tree_from_dict(t) for t in payload["trees"]),
        params=_params_from_dict(payload["params"]),
        n_train=payload["n_train"],
        feature_names=tuple(schema["feature_names"]),
        kinds=tuple(schema["kinds"]),
        levels=tuple(tuple(lv) if lv is not None else None for lv in schema["levels"]),
        groups=groups,
    )


def save_model(forest: Forest, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(forest_to_dict(forest), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path: str) -> Forest:
    with open(path, encoding="utf-8") as fh:
        return forest_from_dict(json.load(fh))
