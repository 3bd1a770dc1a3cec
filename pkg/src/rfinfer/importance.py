"""Variable-importance measures, including the known-biased ones.

Two families are exposed under explicit method tags rather than a single
"importance" number:

* ``oob_permute`` and ``impurity`` are the cheap classics.  Both carry a
  caveat flag: permute-and-repredict inflates correlated features (the
  model is never refit, so permutation probes extrapolation as much as
  signal), and split-gain accumulation favors features with more
  candidate cut points.  They are kept for demonstration and bias
  studies.
* ``permute_rebuild``, ``drop_rebuild``, and
  ``conditional_permute_rebuild`` retrain the forest on transformed data
  with matched subsamples and score the held-out accuracy change — the
  recommended, if costlier, measures.

Scores are raw MSE differences; no normalization is applied.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .data import Dataset, StrataSpec
from .errors import EmptyEvalError, OobCoverageError
from .forest import Forest, ForestParams, fit_forest, inbag_matrix, tree_matrix
from .inference import Transform, _pi_params
from .tree import predict_rows, split_gains
from .utils import TAG_PERMUTE, TAG_TRANSFORM, rng_at

CAVEAT_METHODS = ("oob_permute", "impurity")
CAVEAT_TEXT = "measured without refitting; known to inflate correlated or many-valued features"

REBUILD_MODES = {
    "permute": "permute_rebuild",
    "drop": "drop_rebuild",
    "conditional": "conditional_permute_rebuild",
}


@dataclass(frozen=True)
class ImportanceReport:
    method: str
    feature_names: tuple[str, ...]
    scores: np.ndarray
    caveat: str | None

    def __post_init__(self) -> None:
        if len(self.feature_names) != self.scores.shape[0]:
            raise ValueError("one score per feature required")
        has_caveat = self.caveat is not None
        if has_caveat != (self.method in CAVEAT_METHODS):
            raise ValueError("caveat must be set exactly for the non-rebuild methods")

    def to_rows(self) -> list[dict]:
        return [
            {
                "feature": name,
                "method": self.method,
                "score": float(score),
                "caveat": self.caveat or "",
            }
            for name, score in zip(self.feature_names, self.scores)
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["feature", "method", "score", "caveat"])
        writer.writeheader()
        writer.writerows(self.to_rows())
        return buf.getvalue()


def oob_permutation_importance(forest: Forest, ds: Dataset, seed: int = 0) -> ImportanceReport:
    """Tree-by-tree permute-and-repredict importance on out-of-bag rows.

    For each tree: take its out-of-bag rows Z, permute one feature to get
    Z_pi, and record MSE(Z_pi) - MSE(Z); scores average over trees.  One
    permutation is drawn per (tree, feature).  A feature a tree never
    splits on contributes exactly 0 for that tree.
    """
    if ds.n != forest.n_train:
        raise ValueError("dataset does not match the training row count")
    oob = ~inbag_matrix(forest)
    if not oob.any():
        raise OobCoverageError()
    p = forest.p
    totals = np.zeros(p)
    used = 0
    for b, tree in enumerate(forest.trees):
        rows = np.flatnonzero(oob[b])
        if rows.size == 0:
            continue
        used += 1
        X_oob = ds.X[rows]
        y_oob = ds.y[rows]
        base = predict_rows(tree, X_oob)
        base_mse = np.mean((base - y_oob) ** 2)
        tree_feats = np.unique(tree.feature[tree.feature >= 0])
        for j in range(p):
            # Permuting a feature the tree never routes on cannot change
            # predictions; skip the work and record an exact zero.
            if j not in tree_feats:
                continue
            rng = rng_at(seed, TAG_PERMUTE, b, j)
            X_perm = X_oob.copy()
            X_perm[:, j] = X_perm[rng.permutation(rows.size), j]
            perm = predict_rows(tree, X_perm)
            totals[j] += np.mean((perm - y_oob) ** 2) - base_mse
    if used == 0:
        raise OobCoverageError()
    return ImportanceReport(
        method="oob_permute",
        feature_names=forest.feature_names,
        scores=totals / used,
        caveat=CAVEAT_TEXT,
    )


def impurity_importance(forest: Forest) -> ImportanceReport:
    """Mean per-tree accumulated split gain for each feature."""
    gains = np.zeros(forest.p)
    for tree in forest.trees:
        gains += split_gains(tree, forest.p)
    return ImportanceReport(
        method="impurity",
        feature_names=forest.feature_names,
        scores=gains / forest.B,
        caveat=CAVEAT_TEXT,
    )


def rebuild_importance(
    ds: Dataset,
    params: ForestParams,
    j: int,
    mode: str,
    eval_ds: Dataset,
    seed: int | None = None,
    strata: StrataSpec | None = None,
    workers: int = 1,
) -> float:
    """Held-out accuracy loss from retraining without feature ``j``.

    ``score = MSE(eval; forest on transformed train) - MSE(eval; forest
    on original train)``, with both forests sharing subsample draws.  A
    positive score means the feature was uniquely helpful: no combination
    of the remaining features recovered its contribution.
    """
    if mode not in REBUILD_MODES:
        raise ValueError(f"unknown rebuild mode {mode!r}")
    if eval_ds.n == 0:
        raise EmptyEvalError("evaluation dataset is empty")
    kind = {"permute": "permute", "drop": "drop", "conditional": "conditional_permute"}[mode]
    transform = Transform(kind=kind, features=(j,), strata=strata)
    t_seed = (
        seed
        if seed is not None
        else int(rng_at(params.seed, TAG_TRANSFORM).integers(2**63 - 1))
    )
    ds_pi = transform.apply(ds, t_seed)
    omega = fit_forest(ds, params, workers=workers)
    pi = fit_forest(ds_pi, _pi_params(params, ds_pi.p), workers=workers)
    pred_w = tree_matrix(omega, eval_ds.X).mean(axis=0)
    pred_p = tree_matrix(pi, transform.map_points(eval_ds.X)).mean(axis=0)
    mse_w = float(np.mean((pred_w - eval_ds.y) ** 2))
    mse_p = float(np.mean((pred_p - eval_ds.y) ** 2))
    return mse_p - mse_w
