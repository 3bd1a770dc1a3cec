"""CART regression trees with randomized-split and honest variants.

Split search maximizes the SSE reduction

    gain = SSE(parent) - SSE(left) - SSE(right)

over candidate (feature, threshold) pairs.  Numeric thresholds are
midpoints between consecutive distinct sorted values; categorical splits
are level-subset memberships (all subsets enumerated up to
``MAX_ENUM_LEVELS`` levels, ordered-by-mean-response prefixes beyond).

Two theory-motivated switches are built in:

* ``random_split_prob`` (alpha): at each node, with probability alpha the
  split is drawn uniformly from the admissible candidates instead of
  maximizing gain, which decouples tree geometry from the responses.
* ``honest``: the rows are split 50/50 into a structure half that drives
  the splits and an estimation half that sets the leaf means, decoupling
  leaf values from split selection.

Tie rule (shared with the brute-force test oracle): gains within
``GAIN_TIE_TOL`` of the per-feature maximum count as tied and the
smallest threshold (lexicographically smallest level subset) wins; across
features, per-feature bests within the tolerance of the overall maximum
tie and the smallest feature index wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import CATEGORICAL, MAX_ENUM_LEVELS, NUMERIC, Dataset
from .errors import (
    ArityMismatchError,
    EmptyRowsError,
    NoAdmissibleSplitError,
)
from .utils import TAG_TREE, freeze, rng_at

# Gains closer than this are treated as exact ties so that independent
# implementations of the same split search agree node-for-node.
GAIN_TIE_TOL = 1e-9


@dataclass(frozen=True)
class TreeParams:
    """Hyperparameters for a single regression tree."""

    max_depth: int | None = None
    min_leaf: int = 5
    mtry: int | None = None
    random_split_prob: float = 0.0
    honest: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if not 0.0 <= self.random_split_prob <= 1.0:
            raise ValueError("random_split_prob must lie in [0, 1]")

    def resolve_mtry(self, p: int) -> int:
        if self.mtry is None:
            return max(1, math.ceil(p / 3))
        if self.mtry > p > 0:
            raise ValueError(f"mtry={self.mtry} exceeds feature count {p}")
        return self.mtry


@dataclass(frozen=True)
class Split:
    """Outcome of a single-feature split search."""

    threshold: float | None
    subset: tuple[int, ...] | None
    gain: float


@dataclass
class Tree:
    """Fitted regression tree stored as preorder node arrays.

    ``feature[i] == -1`` marks a leaf; internal nodes carry either a
    numeric ``threshold`` or a categorical level ``subset`` (left child
    membership).  ``value`` is the leaf mean (NaN on internal nodes) and
    ``gain`` the SSE reduction realized by each split.
    """

    feature: np.ndarray
    threshold: np.ndarray
    subset: tuple[tuple[int, ...] | None, ...]
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    gain: np.ndarray
    n_features: int
    in_sample: np.ndarray
    structure_half: np.ndarray | None = None
    estimation_half: np.ndarray | None = None
    _numeric_split: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for name in ("feature", "left", "right", "count", "in_sample"):
            object.__setattr__(self, name, freeze(np.asarray(getattr(self, name))))
        for name in ("threshold", "value", "gain"):
            object.__setattr__(self, name, freeze(np.asarray(getattr(self, name), dtype=np.float64)))
        self._numeric_split = freeze(
            np.array([s is None for s in self.subset], dtype=bool) & (self.feature >= 0)
        )

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())


# ---------------------------------------------------------------- #
# Split search
# ---------------------------------------------------------------- #


def _numeric_block_search(
    X_node: np.ndarray, yc: np.ndarray, min_leaf: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Best split per column of ``X_node`` against centered responses.

    Returns ``(gain, threshold, has_split)`` arrays of length f.  All
    columns are searched in one vectorized pass: sort each column, take
    cumulative response sums, and score every admissible boundary.
    """
    m, f = X_node.shape
    if m < 2 * min_leaf or m < 2:
        return np.full(f, -np.inf), np.full(f, np.nan), np.zeros(f, dtype=bool)

    cols = np.arange(f)
    order = np.argsort(X_node, axis=0)
    xs = X_node[order, cols]
    csum = np.cumsum(yc[order], axis=0)
    total = csum[-1]
    n_left = np.arange(1, m, dtype=np.float64)[:, None]
    left_sum = csum[:-1]
    right_sum = total - left_sum
    gain = left_sum * left_sum / n_left
    gain += right_sum * right_sum / (m - n_left)
    gain -= total * total / m
    gain[xs[:-1] >= xs[1:]] = -np.inf
    if min_leaf > 1:
        counts = np.arange(1, m)
        gain[(counts < min_leaf) | (m - counts < min_leaf)] = -np.inf

    col_max = gain.max(axis=0)
    has = col_max > -np.inf
    first = (gain >= (col_max - GAIN_TIE_TOL)).argmax(axis=0)
    lo = xs[first, cols]
    hi = xs[first + 1, cols]
    thr = 0.5 * (lo + hi)
    # Midpoints can round down onto the lower value for adjacent floats;
    # fall back to the upper value so "x < threshold" still separates.
    thr = np.where(thr > lo, thr, hi)
    return col_max, np.where(has, thr, np.nan), has


def _categorical_search(
    codes: np.ndarray, yc: np.ndarray, min_leaf: int
) -> tuple[float, tuple[int, ...]] | None:
    """Best level-subset split for one categorical column, or None."""
    m = codes.shape[0]
    observed, inv = np.unique(codes.astype(np.int64), return_inverse=True)
    L = observed.shape[0]
    if L < 2 or m < 2 * min_leaf:
        return None
    counts = np.bincount(inv, minlength=L).astype(np.float64)
    sums = np.bincount(inv, weights=yc, minlength=L)
    total = sums.sum()

    if L <= MAX_ENUM_LEVELS:
        masks = np.arange(1, (1 << L) - 1, dtype=np.uint64)
        member = ((masks[:, None] >> np.arange(L, dtype=np.uint64)) & 1).astype(np.float64)
        n_s = member @ counts
        valid = (n_s >= min_leaf) & (m - n_s >= min_leaf)
        if not valid.any():
            return None
        s_s = member @ sums
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = s_s**2 / n_s + (total - s_s) ** 2 / (m - n_s) - total**2 / m
        gain = np.where(valid, gain, -np.inf)
        best = gain.max()
        tie = np.flatnonzero(gain >= best - GAIN_TIE_TOL)
        subsets = [
            tuple(int(observed[b]) for b in range(L) if (int(masks[i]) >> b) & 1)
            for i in tie
        ]
        chosen = min(range(len(tie)), key=lambda i: subsets[i])
        return float(gain[tie[chosen]]), subsets[chosen]

    # Many levels: order by mean response and scan prefix cuts.
    means = sums / counts
    order = np.lexsort((observed, means))
    c_counts = np.cumsum(counts[order])[:-1]
    c_sums = np.cumsum(sums[order])[:-1]
    valid = (c_counts >= min_leaf) & (m - c_counts >= min_leaf)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = c_sums**2 / c_counts + (total - c_sums) ** 2 / (m - c_counts) - total**2 / m
    gain = np.where(valid, gain, -np.inf)
    best = gain.max()
    tie = np.flatnonzero(gain >= best - GAIN_TIE_TOL)
    subsets = [tuple(sorted(int(v) for v in observed[order][: i + 1])) for i in tie]
    chosen = min(range(len(tie)), key=lambda i: subsets[i])
    return float(gain[tie[chosen]]), subsets[chosen]


def best_split(
    x: np.ndarray,
    y: np.ndarray,
    kind: str = NUMERIC,
    min_leaf: int = 1,
) -> Split:
    """Gain-maximizing split of one feature column.

    Raises :class:`NoAdmissibleSplitError` when no candidate leaves at
    least ``min_leaf`` rows on each side (constant responses alone do not
    disqualify a split: every cut then ties at gain 0 and the smallest
    threshold wins).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise ValueError("feature and response lengths differ")
    if x.shape[0] < 2:
        raise NoAdmissibleSplitError("need at least two rows")
    yc = y - y.mean()
    if kind == NUMERIC:
        gains, thresholds, has = _numeric_block_search(x[:, None], yc, min_leaf)
        if not has[0]:
            raise NoAdmissibleSplitError("no admissible numeric split")
        return Split(threshold=float(thresholds[0]), subset=None, gain=float(gains[0]))
    found = _categorical_search(x, yc, min_leaf)
    if found is None:
        raise NoAdmissibleSplitError("no admissible categorical split")
    gain, subset = found
    return Split(threshold=None, subset=subset, gain=gain)


# ---------------------------------------------------------------- #
# Tree growth
# ---------------------------------------------------------------- #


class _Builder:
    """Accumulates preorder node arrays during recursive growth."""

    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.subset: list[tuple[int, ...] | None] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.count: list[int] = []
        self.gain: list[float] = []

    def add_leaf(self, value: float, count: int) -> int:
        idx = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(np.nan)
        self.subset.append(None)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.count.append(count)
        self.gain.append(0.0)
        return idx

    def add_split(
        self,
        feature: int,
        threshold: float | None,
        subset: tuple[int, ...] | None,
        gain: float,
        count: int,
    ) -> int:
        idx = len(self.feature)
        self.feature.append(feature)
        self.threshold.append(np.nan if threshold is None else threshold)
        self.subset.append(subset)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(np.nan)
        self.count.append(count)
        self.gain.append(gain)
        return idx


def _node_best(
    ds: Dataset,
    rows: np.ndarray,
    yc: np.ndarray,
    candidates: np.ndarray,
    min_leaf: int,
    is_num: np.ndarray,
) -> tuple[int, float | None, tuple[int, ...] | None, float] | None:
    """Two-stage tie-broken best split over the candidate features.

    Candidates are scanned in ascending feature order and the incumbent
    is replaced only by a gain more than ``GAIN_TIE_TOL`` better, so the
    smallest feature index wins near-ties.
    """
    num_mask = is_num[candidates]
    cand_num = candidates[num_mask]
    per_feature: list[tuple[int, float, float | None, tuple[int, ...] | None]] = []
    if cand_num.size:
        block = ds.X[rows[:, None], cand_num[None, :]]
        gains, thresholds, has = _numeric_block_search(block, yc, min_leaf)
        for i in np.flatnonzero(has):
            per_feature.append((int(cand_num[i]), float(gains[i]), float(thresholds[i]), None))
    cand_cat = candidates[~num_mask]
    for j in cand_cat:
        found = _categorical_search(ds.X[rows, j], yc, min_leaf)
        if found is not None:
            per_feature.append((int(j), found[0], None, found[1]))
    if not per_feature:
        return None
    if cand_cat.size:
        per_feature.sort(key=lambda item: item[0])

    best_feat = -1
    best_gain = -np.inf
    best_thr: float | None = None
    best_subset: tuple[int, ...] | None = None
    for j, gain, thr, subset in per_feature:
        if gain > best_gain + GAIN_TIE_TOL:
            best_feat, best_gain, best_thr, best_subset = j, gain, thr, subset
    return best_feat, best_thr, best_subset, best_gain


def _node_candidates(
    ds: Dataset,
    rows: np.ndarray,
    candidates: np.ndarray,
    min_leaf: int,
) -> list[tuple[int, float | None, tuple[int, ...] | None]]:
    """Every admissible (feature, cut) pair at this node, canonical order."""
    out: list[tuple[int, float | None, tuple[int, ...] | None]] = []
    m = rows.shape[0]
    if m < 2 * min_leaf:
        return out
    for j in sorted(int(c) for c in candidates):
        col = ds.X[rows, j]
        if ds.kinds[j] == NUMERIC:
            order = np.argsort(col, kind="stable")
            xs = col[order]
            n_left = np.arange(1, m)
            valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (m - n_left >= min_leaf)
            mid = 0.5 * (xs[:-1] + xs[1:])
            mid = np.where(mid > xs[:-1], mid, xs[1:])
            out.extend((j, float(t), None) for t in mid[valid])
        else:
            observed, inv = np.unique(col.astype(np.int64), return_inverse=True)
            L = observed.shape[0]
            if L < 2:
                continue
            counts = np.bincount(inv, minlength=L)
            if L <= MAX_ENUM_LEVELS:
                for mask in range(1, (1 << L) - 1):
                    n_s = sum(int(counts[b]) for b in range(L) if (mask >> b) & 1)
                    if n_s >= min_leaf and m - n_s >= min_leaf:
                        subset = tuple(int(observed[b]) for b in range(L) if (mask >> b) & 1)
                        out.append((j, None, subset))
            else:
                yc = ds.y[rows] - ds.y[rows].mean()
                sums = np.bincount(inv, weights=yc, minlength=L)
                means = sums / counts
                order = np.lexsort((observed, means))
                c_counts = np.cumsum(counts[order])[:-1]
                for i, n_s in enumerate(c_counts):
                    if n_s >= min_leaf and m - n_s >= min_leaf:
                        subset = tuple(sorted(int(v) for v in observed[order][: i + 1]))
                        out.append((j, None, subset))
    return out


def _split_gain(y_node: np.ndarray, left_mask: np.ndarray) -> float:
    yc = y_node - y_node.mean()
    nl = int(left_mask.sum())
    nr = yc.shape[0] - nl
    if nl == 0 or nr == 0:
        return 0.0
    sl = yc[left_mask].sum()
    sr = yc.sum() - sl
    return float(sl**2 / nl + sr**2 / nr - yc.sum() ** 2 / yc.shape[0])


def fit_tree(
    ds: Dataset,
    rows: np.ndarray | list[int],
    params: TreeParams,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Grow a CART regression tree on ``rows`` of ``ds``.

    Stopping: depth limit, fewer than ``2 * min_leaf`` rows, or an exactly
    constant response.  With ``params.honest`` the rows are first split
    50/50 into structure and estimation halves; leaf values then come from
    estimation rows only, falling back to the nearest ancestor with
    estimation rows (or the overall in-sample mean at the root).
    """
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise EmptyRowsError("fit_tree requires at least one row")
    p = ds.p
    mtry = params.resolve_mtry(p) if p > 0 else 0
    if rng is None:
        rng = rng_at(params.seed, TAG_TREE)

    structure_half: np.ndarray | None = None
    estimation_half: np.ndarray | None = None
    if params.honest:
        perm = rng.permutation(rows.size)
        n_struct = (rows.size + 1) // 2
        structure_half = rows[np.sort(perm[:n_struct])]
        estimation_half = rows[np.sort(perm[n_struct:])]
        grow_rows = structure_half
    else:
        grow_rows = rows

    fallback_value = float(ds.y[rows].mean())
    builder = _Builder()
    all_features = np.arange(p, dtype=np.int64)
    is_num = np.array([kind == NUMERIC for kind in ds.kinds], dtype=bool)

    def grow(struct_rows: np.ndarray, est_rows: np.ndarray, depth: int, inherited: float) -> int:
        y_node = ds.y[struct_rows]
        m = struct_rows.shape[0]
        if params.honest:
            leaf_value = float(ds.y[est_rows].mean()) if est_rows.size else inherited
            leaf_count = int(est_rows.size)
        else:
            leaf_value = float(y_node.mean())
            leaf_count = m

        at_depth = params.max_depth is not None and depth >= params.max_depth
        if p == 0 or at_depth or m < 2 * params.min_leaf or y_node.max() == y_node.min():
            return builder.add_leaf(leaf_value, leaf_count)

        if mtry < p:
            candidates = np.sort(rng.choice(p, size=mtry, replace=False))
        else:
            candidates = all_features

        yc = y_node - y_node.mean()
        found = _node_best(ds, struct_rows, yc, candidates, params.min_leaf, is_num)
        if found is None:
            return builder.add_leaf(leaf_value, leaf_count)
        feat, thr, subset, gain = found

        if params.random_split_prob > 0 and rng.random() < params.random_split_prob:
            options = _node_candidates(ds, struct_rows, candidates, params.min_leaf)
            feat, thr, subset = options[int(rng.integers(len(options)))]
            col = ds.X[struct_rows, feat]
            if thr is not None:
                mask = col < thr
            else:
                mask = np.isin(col.astype(np.int64), subset)
            gain = _split_gain(y_node, mask)

        col = ds.X[struct_rows, feat]
        if thr is not None:
            left_mask = col < thr
        else:
            left_mask = np.isin(col.astype(np.int64), subset)
        node = builder.add_split(feat, thr, subset, gain, leaf_count if params.honest else m)

        if params.honest and est_rows.size:
            ecol = ds.X[est_rows, feat]
            e_mask = ecol < thr if thr is not None else np.isin(ecol.astype(np.int64), subset)
        else:
            e_mask = np.zeros(0, dtype=bool)
        est_here = float(ds.y[est_rows].mean()) if params.honest and est_rows.size else inherited

        left_est = est_rows[e_mask] if params.honest else est_rows
        right_est = est_rows[~e_mask] if params.honest else est_rows
        builder.left[node] = grow(struct_rows[left_mask], left_est, depth + 1, est_here)
        builder.right[node] = grow(struct_rows[~left_mask], right_est, depth + 1, est_here)
        return node

    empty = np.empty(0, dtype=np.int64)
    grow(
        grow_rows,
        estimation_half if params.honest else empty,
        0,
        fallback_value,
    )

    return Tree(
        feature=np.asarray(builder.feature, dtype=np.int32),
        threshold=np.asarray(builder.threshold),
        subset=tuple(builder.subset),
        left=np.asarray(builder.left, dtype=np.int32),
        right=np.asarray(builder.right, dtype=np.int32),
        value=np.asarray(builder.value),
        count=np.asarray(builder.count, dtype=np.int64),
        gain=np.asarray(builder.gain),
        n_features=p,
        in_sample=rows,
        structure_half=structure_half,
        estimation_half=estimation_half,
    )


# ---------------------------------------------------------------- #
# Prediction and summaries
# ---------------------------------------------------------------- #


def predict_rows(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Route the rows of ``X`` to leaves; returns leaf values.

    Numeric routing: left iff value < threshold (equality goes right).
    Categorical routing: left iff the level code is in the node subset.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != tree.n_features:
        raise ArityMismatchError(
            f"query has {X.shape[1]} features, tree expects {tree.n_features}"
        )
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        active = np.flatnonzero(tree.feature[node] >= 0)
        if active.size == 0:
            break
        cur = node[active]
        feats = tree.feature[cur]
        go_left = np.empty(active.size, dtype=bool)
        num = tree._numeric_split[cur]
        if num.any():
            sel = active[num]
            go_left[num] = X[sel, feats[num]] < tree.threshold[cur[num]]
        if not num.all():
            cat_idx = np.flatnonzero(~num)
            for nid in np.unique(cur[cat_idx]):
                subset = tree.subset[nid]
                assert subset is not None
                pts = cat_idx[cur[cat_idx] == nid]
                codes = X[active[pts], tree.feature[nid]].astype(np.int64)
                go_left[pts] = np.isin(codes, subset)
        node[active] = np.where(go_left, tree.left[cur], tree.right[cur])
    return tree.value[node]


def predict_tree(tree: Tree, x: np.ndarray | list[float]) -> float:
    """Prediction for a single feature tuple."""
    return float(predict_rows(tree, np.asarray(x, dtype=np.float64)[None, :])[0])


def split_gains(tree: Tree, p: int | None = None) -> np.ndarray:
    """Per-feature sum of realized split gains; unused features get 0."""
    p = tree.n_features if p is None else p
    out = np.zeros(p)
    internal = tree.feature >= 0
    np.add.at(out, tree.feature[internal], tree.gain[internal])
    return out


def leaf_partition(tree: Tree, ds: Dataset, rows: np.ndarray) -> np.ndarray:
    """Leaf index reached by each of ``rows`` (for partition checks)."""
    X = ds.X[np.asarray(rows, dtype=np.int64)]
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        active = np.flatnonzero(tree.feature[node] >= 0)
        if active.size == 0:
            return node
        cur = node[active]
        feats = tree.feature[cur]
        go_left = np.empty(active.size, dtype=bool)
        num = tree._numeric_split[cur]
        if num.any():
            sel = active[num]
            go_left[num] = X[sel, feats[num]] < tree.threshold[cur[num]]
        if not num.all():
            cat_idx = np.flatnonzero(~num)
            for nid in np.unique(cur[cat_idx]):
                subset = tree.subset[nid]
                assert subset is not None
                pts = cat_idx[cur[cat_idx] == nid]
                codes = X[active[pts], tree.feature[nid]].astype(np.int64)
                go_left[pts] = np.isin(codes, subset)
        node[active] = np.where(go_left, tree.left[cur], tree.right[cur])


# ---------------------------------------------------------------- #
# Serialization
# ---------------------------------------------------------------- #


def tree_to_dict(tree: Tree) -> dict:
    """JSON-ready preorder node list plus sampling metadata."""
    nodes = []
    for i in range(tree.n_nodes):
        if tree.feature[i] < 0:
            nodes.append(
                {"leaf": True, "value": float(tree.value[i]), "count": int(tree.count[i])}
            )
        else:
            node: dict = {
                "leaf": False,
                "feature": int(tree.feature[i]),
                "left": int(tree.left[i]),
                "right": int(tree.right[i]),
                "gain": float(tree.gain[i]),
                "count": int(tree.count[i]),
            }
            if tree.subset[i] is None:
                node["threshold"] = float(tree.threshold[i])
            else:
                node["subset"] = list(tree.subset[i])
            nodes.append(node)
    out = {
        "nodes": nodes,
        "n_features": tree.n_features,
        "in_sample": tree.in_sample.tolist(),
    }
    if tree.structure_half is not None:
        out["structure_half"] = tree.structure_half.tolist()
        out["estimation_half"] = (
            tree.estimation_half.tolist() if tree.estimation_half is not None else []
        )
    return out


def tree_from_dict(payload: dict) -> Tree:
    nodes = payload["nodes"]
    n = len(nodes)
    feature = np.full(n, -1, dtype=np.int32)
    threshold = np.full(n, np.nan)
    subset: list[tuple[int, ...] | None] = [None] * n
    left = np.full(n, -1, dtype=np.int32)
    right = np.full(n, -1, dtype=np.int32)
    value = np.full(n, np.nan)
    count = np.zeros(n, dtype=np.int64)
    gain = np.zeros(n)
    for i, node in enumerate(nodes):
        count[i] = node["count"]
        if node["leaf"]:
            value[i] = node["value"]
        else:
            feature[i] = node["feature"]
            left[i] = node["left"]
            right[i] = node["right"]
            gain[i] = node["gain"]
            if "subset" in node:
                subset[i] = tuple(int(v) for v in node["subset"])
            else:
                threshold[i] = node["threshold"]
    return Tree(
        feature=feature,
        threshold=threshold,
        subset=tuple(subset),
        left=left,
        right=right,
        value=value,
        count=count,
        gain=gain,
        n_features=payload["n_features"],
        in_sample=np.asarray(payload["in_sample"], dtype=np.int64),
        structure_half=(
            np.asarray(payload["structure_half"], dtype=np.int64)
            if "structure_half" in payload
            else None
        ),
        estimation_half=(
            np.asarray(payload["estimation_half"], dtype=np.int64)
            if "structure_half" in payload
            else None
        ),
    )
