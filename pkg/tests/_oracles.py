"""Independent brute-force oracles used to cross-check the fast paths.

Everything here recomputes from first principles: explicit SSE sums over
explicit partitions, exhaustive enumeration of candidate splits, plain
recursion.  The only shared contract with the implementation is the tie
rule (gains within GAIN_TIE_TOL count as tied; smallest threshold, then
lexicographically smallest subset, then smallest feature index wins).
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from rfinfer.data import CATEGORICAL, NUMERIC, Dataset
from rfinfer.tree import GAIN_TIE_TOL


def sse(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    return float(((values - values.mean()) ** 2).sum())


def candidate_splits(ds: Dataset, rows: np.ndarray, j: int, min_leaf: int):
    """All admissible cuts of feature j over rows, in canonical order."""
    col = ds.X[rows, j]
    out = []
    if ds.kinds[j] == NUMERIC:
        distinct = np.unique(col)
        for lo, hi in zip(distinct[:-1], distinct[1:]):
            thr = 0.5 * (lo + hi)
            if not thr > lo:
                thr = hi
            mask = col < thr
            if mask.sum() >= min_leaf and (~mask).sum() >= min_leaf:
                out.append((float(thr), None, mask))
    else:
        observed = sorted(set(int(v) for v in col))
        for size in range(1, len(observed)):
            for subset in combinations(observed, size):
                mask = np.isin(col.astype(np.int64), subset)
                if mask.sum() >= min_leaf and (~mask).sum() >= min_leaf:
                    out.append((None, subset, mask))
        out.sort(key=lambda item: item[1])
    return out


def best_split_oracle(ds: Dataset, rows: np.ndarray, min_leaf: int):
    """Exhaustive search over every (feature, cut) pair.

    Within a feature, candidates whose gain is within GAIN_TIE_TOL of the
    feature maximum tie and the canonical-order first one wins; across
    features a challenger must beat the incumbent by more than the
    tolerance.
    """
    y = ds.y[rows]
    parent = sse(y)
    best = None
    best_gain = -np.inf
    for j in range(ds.p):
        feat_best = None
        feat_gain = -np.inf
        cands = candidate_splits(ds, rows, j, min_leaf)
        gains = [parent - sse(y[mask]) - sse(y[~mask]) for _, _, mask in cands]
        if not gains:
            continue
        g_max = max(gains)
        for (thr, subset, mask), g in zip(cands, gains):
            if g >= g_max - GAIN_TIE_TOL:
                feat_best = (j, thr, subset, g, mask)
                feat_gain = g
                break
        if feat_best is not None and feat_gain > best_gain + GAIN_TIE_TOL:
            best = feat_best
            best_gain = feat_gain
    return best


def fit_tree_oracle(ds: Dataset, rows: np.ndarray, min_leaf: int, max_depth=None, depth=0):
    """Plain recursive CART matching the implementation's stopping rules."""
    y = ds.y[rows]
    m = rows.shape[0]
    stop = (
        (max_depth is not None and depth >= max_depth)
        or m < 2 * min_leaf
        or y.max() == y.min()
        or ds.p == 0
    )
    found = None if stop else best_split_oracle(ds, rows, min_leaf)
    if found is None:
        return {"leaf": True, "value": float(y.mean()), "count": m}
    j, thr, subset, gain, mask = found
    return {
        "leaf": False,
        "feature": j,
        "threshold": thr,
        "subset": subset,
        "gain": gain,
        "left": fit_tree_oracle(ds, rows[mask], min_leaf, max_depth, depth + 1),
        "right": fit_tree_oracle(ds, rows[~mask], min_leaf, max_depth, depth + 1),
    }


def tree_nodes_equal(tree, node_idx: int, oracle: dict, atol=1e-9) -> bool:
    """Walk a fitted Tree against the oracle's nested dict, node for node."""
    is_leaf = tree.feature[node_idx] < 0
    if oracle["leaf"] != is_leaf:
        return False
    if is_leaf:
        return (
            abs(tree.value[node_idx] - oracle["value"]) < atol
            and tree.count[node_idx] == oracle["count"]
        )
    if int(tree.feature[node_idx]) != oracle["feature"]:
        return False
    if oracle["subset"] is None:
        if tree.subset[node_idx] is not None:
            return False
        if tree.threshold[node_idx] != oracle["threshold"]:
            return False
    else:
        if tree.subset[node_idx] != oracle["subset"]:
            return False
    if abs(tree.gain[node_idx] - oracle["gain"]) > max(atol, 1e-9 * abs(oracle["gain"])):
        return False
    return tree_nodes_equal(tree, tree.left[node_idx], oracle["left"], atol) and tree_nodes_equal(
        tree, tree.right[node_idx], oracle["right"], atol
    )


def random_small_dataset(rng: np.random.Generator, with_categorical: bool):
    """Tiny random dataset for oracle equivalence sweeps (n<=12, p<=3)."""
    from rfinfer.data import from_arrays

    n = int(rng.integers(2, 13))
    p = int(rng.integers(1, 4))
    X = np.round(rng.standard_normal((n, p)), 3)
    y = np.round(rng.standard_normal(n), 3)
    if not with_categorical:
        return from_arrays(X, y)
    kinds = []
    levels = []
    for j in range(p):
        if rng.random() < 0.4:
            L = int(rng.integers(2, 5))
            X[:, j] = rng.integers(0, L, size=n)
            kinds.append(CATEGORICAL)
            levels.append(tuple(chr(ord("a") + i) for i in range(L)))
        else:
            kinds.append(NUMERIC)
            levels.append(None)
    return Dataset(X, y, tuple(kinds), tuple(levels), tuple(f"x{j+1}" for j in range(p)))
