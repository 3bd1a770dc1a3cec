"""Variance estimation, confidence intervals, and chi-square tests.

The sampling-variance layer treats a subsampled forest as an incomplete
U-statistic.  Trees are organized into ``n_z`` groups of ``n_mc`` trees;
every tree in group ``g`` is fit on a subsample forced to contain the
group's anchor row ``z_g``.  Writing ``h_g`` for a group's mean prediction
vector over the query points, the covariance of the forest prediction is
estimated by the two-term combination

    Sigma = (k^2 / n) * zeta_1  +  zeta_k / B

where ``zeta_k`` is the between-tree sample covariance and ``zeta_1``
estimates the covariance induced by one shared sample point.  The naive
group-mean covariance overstates ``zeta_1`` by roughly ``zeta_k / n_mc``
(within-group Monte Carlo noise), so by default it is debiased as

    zeta_1 = (n_mc * cov(h_g) - zeta_k) / (n_mc - 1)

and clamped to be positive semidefinite.  Set ``group_bias_correction``
to ``False`` to keep the raw group-mean covariance.

Paired tests refit the forest on transformed training data (permuted,
dropped, or conditionally permuted features) while reusing the exact
subsample draws tree for tree, and test the difference vector of the two
forests' predictions against a chi-square reference.  Grid tests contrast
predictions across feature levels; their contrast covariances are rank
deficient by construction, which the eigenvalue-truncation stabilizer
absorbs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .data import Dataset, StrataSpec, conditional_permute_feature, default_strata, drop_feature, permute_features_jointly
from .errors import (
    DimensionMismatchError,
    EmptyEvalError,
    GridTooSmallError,
    GroupCountError,
    LevelOutOfRangeError,
    SchemeUnsupportedError,
    ZeroCovarianceError,
)
from .forest import BOOTSTRAP, Forest, ForestGroups, ForestParams, fit_forest, tree_matrix
from .utils import TAG_ANCHORS, TAG_SWAP, TAG_TRANSFORM, rng_at

# Condition number above which the chi-square statistic switches to the
# truncated-eigenspace form under the "auto" policy.
COND_THRESHOLD = 1e8
TRACE_FRACTION = 0.99


@dataclass(frozen=True)
class Moments:
    """Mean vector and covariance of forest predictions at query points."""

    points: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    meta: dict

    def __post_init__(self) -> None:
        d = self.mean.shape[0]
        if self.points.shape[0] != d or self.cov.shape != (d, d):
            raise DimensionMismatchError("points, mean, and cov sizes disagree")


@dataclass(frozen=True)
class TestResult:
    """Outcome of one hypothesis test, JSON-serializable via ``to_dict``."""

    method: str
    statistic: float
    p_value: float
    dof: int | None = None
    n_perm: int | None = None
    diff: np.ndarray | None = None
    projection_dim: int | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "statistic": self.statistic,
            "dof": self.dof,
            "n_perm": self.n_perm,
            "p_value": self.p_value,
            "projection_dim": self.projection_dim,
            "diff": self.diff.tolist() if self.diff is not None else None,
        }


@dataclass(frozen=True)
class Transform:
    """Training-data alteration for paired-forest tests.

    ``kind`` is ``"permute"`` (one shared row permutation over
    ``features``), ``"drop"``, or ``"conditional_permute"`` (single
    feature, within-stratum permutation; strata default to clusters of
    the remaining features).
    """

    kind: str
    features: tuple[int, ...]
    strata: StrataSpec | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("permute", "drop", "conditional_permute"):
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if not self.features:
            raise ValueError("transform needs at least one feature")
        if self.kind == "conditional_permute" and len(self.features) != 1:
            raise ValueError("conditional permutation handles one feature at a time")

    def apply(self, ds: Dataset, seed: int) -> Dataset:
        if self.kind == "permute":
            return permute_features_jointly(ds, list(self.features), seed)
        if self.kind == "conditional_permute":
            j = self.features[0]
            strata = self.strata if self.strata is not None else default_strata(ds, j, seed)
            return conditional_permute_feature(ds, j, strata, seed)
        out = ds
        for j in sorted(self.features, reverse=True):
            out = drop_feature(out, j)
        return out

    def map_points(self, X: np.ndarray) -> np.ndarray:
        """Project query points onto the transformed feature arity."""
        if self.kind != "drop":
            return X
        keep = [c for c in range(X.shape[1]) if c not in self.features]
        return X[:, keep]


@dataclass(frozen=True)
class PairedForests:
    """Original- and transformed-data forests with matched subsamples."""

    omega: Forest
    pi: Forest
    transform: Transform


# ---------------------------------------------------------------- #
# Covariance assembly
# ---------------------------------------------------------------- #


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _clamp_psd(a: np.ndarray) -> np.ndarray:
    """Nearest-in-eigenvalue PSD matrix: negative eigenvalues go to 0."""
    w, v = np.linalg.eigh(_sym(a))
    if w.size and w.min() >= 0:
        return _sym(a)
    w = np.clip(w, 0.0, None)
    return _sym((v * w) @ v.T)


def _cov(rows: np.ndarray) -> np.ndarray:
    """Sample covariance (ddof=1) of row vectors, always 2-D."""
    c = np.cov(rows, rowvar=False, ddof=1)
    return np.atleast_2d(c)


def _grouped_sigma(
    preds: np.ndarray,
    n: int,
    k: int,
    n_z: int,
    n_mc: int,
    correct: bool,
    design: str = "half_sample",
) -> np.ndarray:
    """Two-term covariance from grouped tree predictions.

    Between-group covariance of group means, debiased for within-group
    Monte Carlo noise, plus the Monte Carlo floor ``zeta_k / B``.  Under
    the half-sample design a group mean emulates a refit on half the
    data, whose between-group variance matches the sampling variance of
    the full forest to first order (exactly so for linear statistics), so
    no extrapolation factor is needed; the row-anchor design estimates
    the one-shared-point covariance and scales it by ``k^2 / n``.
    """
    group_means = preds.reshape(n_z, n_mc, -1).mean(axis=1)
    zeta_k = _cov(preds)
    zeta_1 = _cov(group_means)
    if correct:
        zeta_1 = _clamp_psd((n_mc * zeta_1 - zeta_k) / (n_mc - 1))
    scale = 1.0 if design == "half_sample" else (k * k / n)
    sigma = scale * zeta_1 + zeta_k / preds.shape[0]
    return _clamp_psd(sigma)


def _check_grouped(params: ForestParams, n: int, n_z: int, n_mc: int, design: str) -> None:
    if params.scheme == BOOTSTRAP:
        raise SchemeUnsupportedError("grouped variance estimation needs a subsample scheme")
    if design not in ("half_sample", "row_anchor"):
        raise ValueError(f"unknown group design {design!r}")
    if n_z < 2 or n_mc < 2:
        raise GroupCountError("need n_z >= 2 anchors and n_mc >= 2 trees per anchor")
    if n_z > n:
        raise GroupCountError(f"n_z={n_z} exceeds the row count {n}")
    if params.B != n_z * n_mc:
        raise GroupCountError(f"B={params.B} must equal n_z*n_mc={n_z * n_mc}")


def _draw_groups(
    seed: int, n: int, n_z: int, n_mc: int, design: str
) -> tuple[ForestGroups, np.ndarray | None, list[np.ndarray] | None]:
    """Anchor metadata plus the per-tree constraints for forest fitting."""
    rng = rng_at(seed, TAG_ANCHORS)
    if design == "row_anchor":
        anchors = rng.choice(n, size=n_z, replace=False)
        required = np.repeat(anchors, n_mc)
        return ForestGroups(n_z=n_z, n_mc=n_mc, anchors=anchors, design=design), required, None
    half = (n + 1) // 2
    pools = [np.sort(rng.choice(n, size=half, replace=False)) for _ in range(n_z)]
    anchors = np.stack(pools)
    per_tree = [pools[b // n_mc] for b in range(n_z * n_mc)]
    return ForestGroups(n_z=n_z, n_mc=n_mc, anchors=anchors, design=design), None, per_tree


def _as_points(points: np.ndarray, p: int) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :] if p > 1 else pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != p:
        raise DimensionMismatchError(f"query points must be (d, {p})")
    return pts


def estimate_moments(
    ds: Dataset,
    params: ForestParams,
    points: np.ndarray,
    n_z: int = 50,
    n_mc: int = 20,
    workers: int = 1,
    group_bias_correction: bool = True,
    group_design: str = "half_sample",
) -> tuple[Forest, Moments]:
    """Fit an anchored-group forest and estimate prediction moments.

    Requires ``params.B == n_z * n_mc``.  Returns the forest together
    with the mean prediction vector and its estimated covariance over the
    query points.
    """
    _check_grouped(params, ds.n, n_z, n_mc, group_design)
    pts = _as_points(points, ds.p)
    k = params.resolve_k(ds.n)
    groups, required, pools = _draw_groups(params.seed, ds.n, n_z, n_mc, group_design)
    forest = fit_forest(
        ds, params, workers=workers, required_rows=required, row_pools=pools, groups=groups
    )
    preds = tree_matrix(forest, pts)
    sigma = _grouped_sigma(preds, ds.n, k, n_z, n_mc, group_bias_correction, group_design)
    mom = Moments(
        points=pts,
        mean=preds.mean(axis=0),
        cov=sigma,
        meta={
            "n": ds.n,
            "k": k,
            "n_z": n_z,
            "n_mc": n_mc,
            "corrected": group_bias_correction,
            "design": group_design,
        },
    )
    return forest, mom


def moments_from_forest(
    forest: Forest, points: np.ndarray, group_bias_correction: bool = True
) -> Moments:
    """Moments at new points from an already-fitted grouped forest."""
    if forest.groups is None:
        raise SchemeUnsupportedError("forest was not fit with anchored groups")
    pts = _as_points(points, forest.p)
    g = forest.groups
    k = forest.params.resolve_k(forest.n_train)
    preds = tree_matrix(forest, pts)
    sigma = _grouped_sigma(
        preds, forest.n_train, k, g.n_z, g.n_mc, group_bias_correction, g.design
    )
    return Moments(
        points=pts,
        mean=preds.mean(axis=0),
        cov=sigma,
        meta={
            "n": forest.n_train,
            "k": k,
            "n_z": g.n_z,
            "n_mc": g.n_mc,
            "corrected": group_bias_correction,
            "design": g.design,
        },
    )


def confidence_interval(mom: Moments, i: int, level: float = 0.95) -> tuple[float, float]:
    """Normal-theory interval for the forest's estimand at point ``i``."""
    if not 0.0 < level < 1.0:
        raise LevelOutOfRangeError(f"level {level} outside (0, 1)")
    if not 0 <= i < mom.mean.shape[0]:
        raise DimensionMismatchError(f"point index {i} out of range")
    half = stats.norm.ppf(0.5 * (1.0 + level)) * float(np.sqrt(max(mom.cov[i, i], 0.0)))
    return float(mom.mean[i] - half), float(mom.mean[i] + half)


# ---------------------------------------------------------------- #
# Chi-square machinery
# ---------------------------------------------------------------- #


def chi2_test(
    D: np.ndarray,
    cov: np.ndarray,
    stabilize: str = "auto",
    trace_frac: float = TRACE_FRACTION,
    cond_threshold: float = COND_THRESHOLD,
    method: str = "chi2",
) -> TestResult:
    """Quadratic-form test of ``D = 0`` against ``N(0, cov)``.

    Well-conditioned covariances use the full-rank statistic
    ``D' cov^{-1} D`` on ``dim(D)`` degrees of freedom.  If the condition
    number exceeds ``cond_threshold`` (or ``stabilize="always"``), both
    ``D`` and ``cov`` are projected onto the leading eigenvectors holding
    ``trace_frac`` of the trace, and the test runs in that subspace.
    """
    D = np.asarray(D, dtype=np.float64).ravel()
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    d = D.shape[0]
    if cov.shape != (d, d):
        raise DimensionMismatchError(f"cov shape {cov.shape} does not match D of length {d}")
    if stabilize not in ("auto", "always", "never"):
        raise ValueError(f"unknown stabilization policy {stabilize!r}")
    if not D.any():
        return TestResult(method=method, statistic=0.0, dof=d, p_value=1.0, diff=D.copy())

    w, v = np.linalg.eigh(_sym(cov))
    w = np.clip(w, 0.0, None)
    w_max = float(w.max())
    if w_max <= 0.0:
        raise ZeroCovarianceError("covariance has no positive eigenvalue")
    w_min = float(w.min())
    ill = w_min <= 0.0 or (w_max / w_min) > cond_threshold
    project = stabilize == "always" or (stabilize == "auto" and ill)

    order = np.argsort(w)[::-1]
    w_sorted = w[order]
    coords = v.T[order] @ D
    if project:
        cum = np.cumsum(w_sorted)
        r = int(np.searchsorted(cum, trace_frac * cum[-1]) + 1)
        r = min(r, d)
        statistic = float(np.sum(coords[:r] ** 2 / w_sorted[:r]))
        dof = r
        projection_dim = r
    else:
        positive = w_sorted > 0.0
        statistic = float(np.sum(coords[positive] ** 2 / w_sorted[positive]))
        dof = d
        projection_dim = None
    p = float(stats.chi2.sf(statistic, dof))
    return TestResult(
        method=method,
        statistic=statistic,
        dof=dof,
        p_value=p,
        diff=D.copy(),
        projection_dim=projection_dim,
    )


# ---------------------------------------------------------------- #
# Paired forests
# ---------------------------------------------------------------- #


def _pi_params(params: ForestParams, p_pi: int) -> ForestParams:
    """Clamp an explicit mtry so drop-mode refits stay valid."""
    mtry = params.tree.mtry
    if mtry is not None and p_pi >= 1 and mtry > p_pi:
        return replace(params, tree=replace(params.tree, mtry=p_pi))
    return params


def fit_paired(
    ds: Dataset,
    params: ForestParams,
    transform: Transform,
    points: np.ndarray,
    n_z: int = 50,
    n_mc: int = 20,
    workers: int = 1,
    group_bias_correction: bool = True,
    group_design: str = "half_sample",
) -> tuple[PairedForests, Moments]:
    """Fit matched forests on original and transformed data.

    One global transform is drawn from the master seed; both forests then
    reuse identical subsample index draws tree for tree, so the per-tree
    prediction differences form the kernel of the variance estimate.  The
    returned Moments hold ``D = mean_omega - mean_pi`` and its estimated
    covariance, assembled by the same two-term grouped formula.
    """
    _check_grouped(params, ds.n, n_z, n_mc, group_design)
    pts = _as_points(points, ds.p)
    k = params.resolve_k(ds.n)
    ds_pi = transform.apply(ds, int(rng_at(params.seed, TAG_TRANSFORM).integers(2**63 - 1)))

    groups, required, pools = _draw_groups(params.seed, ds.n, n_z, n_mc, group_design)
    omega = fit_forest(
        ds, params, workers=workers, required_rows=required, row_pools=pools, groups=groups
    )
    pi = fit_forest(
        ds_pi,
        _pi_params(params, ds_pi.p),
        workers=workers,
        required_rows=required,
        row_pools=pools,
        groups=groups,
    )
    diff = tree_matrix(omega, pts) - tree_matrix(pi, transform.map_points(pts))
    sigma = _grouped_sigma(diff, ds.n, k, n_z, n_mc, group_bias_correction, group_design)
    mom = Moments(
        points=pts,
        mean=diff.mean(axis=0),
        cov=sigma,
        meta={
            "n": ds.n,
            "k": k,
            "n_z": n_z,
            "n_mc": n_mc,
            "corrected": group_bias_correction,
            "design": group_design,
            "transform": transform.kind,
        },
    )
    return PairedForests(omega=omega, pi=pi, transform=transform), mom


def paired_difference_test(
    ds: Dataset,
    params: ForestParams,
    transform: Transform,
    points: np.ndarray,
    n_z: int = 50,
    n_mc: int = 20,
    stabilize: str = "auto",
    workers: int = 1,
) -> tuple[PairedForests, TestResult]:
    """Chi-square test of zero prediction difference at the query points."""
    paired, mom = fit_paired(ds, params, transform, points, n_z=n_z, n_mc=n_mc, workers=workers)
    result = chi2_test(mom.mean, mom.cov, stabilize=stabilize, method="paired_chi2")
    return paired, result


# ---------------------------------------------------------------- #
# Grid contrast tests
# ---------------------------------------------------------------- #


def _effect_points(
    ds_p: int, j: int, levels: np.ndarray, complements: np.ndarray
) -> np.ndarray:
    # row i * K + k holds complement k with feature j forced to level i
    pts = np.tile(complements, (levels.shape[0], 1))
    pts[:, j] = np.repeat(levels, complements.shape[0])
    return pts


def test_effect(
    ds: Dataset,
    params: ForestParams,
    j: int,
    levels: np.ndarray,
    complements: np.ndarray,
    n_z: int = 50,
    n_mc: int = 20,
    stabilize: str = "auto",
    workers: int = 1,
    group_bias_correction: bool = True,
) -> TestResult:
    """Grid test of whether feature ``j`` shifts the prediction surface.

    Evaluates the forest on every (level, complement) combination and
    tests the contrasts ``m[i,k] - m[i',k]`` across level pairs, which
    vanish exactly when the surface ignores feature ``j``.
    """
    levels = np.asarray(levels, dtype=np.float64).ravel()
    complements = _as_points(complements, ds.p)
    L, K = levels.shape[0], complements.shape[0]
    if L < 2 or K < 1:
        raise GridTooSmallError("need >= 2 levels and >= 1 complement point")
    pts = _effect_points(ds.p, j, levels, complements)
    _, mom = estimate_moments(
        ds, params, pts, n_z=n_z, n_mc=n_mc, workers=workers,
        group_bias_correction=group_bias_correction,
    )
    rows = []
    for i in range(L):
        for i2 in range(i + 1, L):
            for kk in range(K):
                row = np.zeros(L * K)
                row[i * K + kk] = 1.0
                row[i2 * K + kk] = -1.0
                rows.append(row)
    C = np.asarray(rows)
    return chi2_test(C @ mom.mean, C @ mom.cov @ C.T, stabilize=stabilize, method="effect_chi2")


def test_interaction(
    ds: Dataset,
    params: ForestParams,
    j1: int,
    j2: int,
    levels1: np.ndarray,
    levels2: np.ndarray,
    complements: np.ndarray,
    n_z: int = 50,
    n_mc: int = 20,
    stabilize: str = "auto",
    workers: int = 1,
    group_bias_correction: bool = True,
) -> TestResult:
    """Grid test of additivity between features ``j1`` and ``j2``.

    The contrasts are second differences over level pairs,
    ``m[i,j,k] - m[i',j,k] - m[i,j',k] + m[i',j',k]``, which annihilate
    any additive surface exactly.
    """
    levels1 = np.asarray(levels1, dtype=np.float64).ravel()
    levels2 = np.asarray(levels2, dtype=np.float64).ravel()
    complements = _as_points(complements, ds.p)
    L1, L2, K = levels1.shape[0], levels2.shape[0], complements.shape[0]
    if L1 < 2 or L2 < 2 or K < 1:
        raise GridTooSmallError("need >= 2 levels on each tested feature")
    pts = np.repeat(complements[None, None, :, :], L1, axis=0).repeat(L2, axis=1).copy()
    pts[:, :, :, j1] = levels1[:, None, None]
    pts[:, :, :, j2] = levels2[None, :, None]
    pts = pts.reshape(-1, ds.p)

    _, mom = estimate_moments(
        ds, params, pts, n_z=n_z, n_mc=n_mc, workers=workers,
        group_bias_correction=group_bias_correction,
    )

    def idx(i: int, jj: int, kk: int) -> int:
        return (i * L2 + jj) * K + kk

    rows = []
    for i in range(L1):
        for i2 in range(i + 1, L1):
            for jj in range(L2):
                for j2_ in range(jj + 1, L2):
                    for kk in range(K):
                        row = np.zeros(L1 * L2 * K)
                        row[idx(i, jj, kk)] += 1.0
                        row[idx(i2, jj, kk)] -= 1.0
                        row[idx(i, j2_, kk)] -= 1.0
                        row[idx(i2, j2_, kk)] += 1.0
                        rows.append(row)
    C = np.asarray(rows)
    return chi2_test(
        C @ mom.mean, C @ mom.cov @ C.T, stabilize=stabilize, method="interaction_chi2"
    )


# ---------------------------------------------------------------- #
# Tree-swap permutation test
# ---------------------------------------------------------------- #


def tree_swap_test(
    paired: PairedForests,
    eval_ds: Dataset,
    n_perm: int = 499,
    seed: int = 0,
) -> TestResult:
    """Permutation test swapping aligned trees between paired forests.

    The statistic is the held-out accuracy gap
    ``MSE(pi-forest) - MSE(omega-forest)``; its null distribution comes
    from independently swapping each aligned tree pair with probability
    one half and recomputing.  The p-value uses the standard
    ``(1 + #{perm >= observed}) / (n_perm + 1)`` form, so two identical
    forests give p = 1 exactly.
    """
    if eval_ds.n == 0:
        raise EmptyEvalError("evaluation dataset is empty")
    if n_perm < 99:
        raise ValueError("n_perm must be at least 99")
    preds_w = tree_matrix(paired.omega, eval_ds.X)
    preds_p = tree_matrix(paired.pi, paired.transform.map_points(eval_ds.X))
    B = preds_w.shape[0]
    y = eval_ds.y
    sum_w = preds_w.sum(axis=0)
    sum_p = preds_p.sum(axis=0)
    delta = preds_p - preds_w

    def gap(swap_rows: np.ndarray) -> np.ndarray:
        shift = swap_rows @ delta
        f_w = (sum_w + shift) / B
        f_p = (sum_p - shift) / B
        return ((f_p - y) ** 2).mean(axis=-1) - ((f_w - y) ** 2).mean(axis=-1)

    observed = float(gap(np.zeros((1, B))))
    swaps = (rng_at(seed, TAG_SWAP).random((n_perm, B)) < 0.5).astype(np.float64)
    perm_stats = gap(swaps)
    count = int(np.sum(perm_stats >= observed))
    p = (1.0 + count) / (n_perm + 1.0)
    return TestResult(method="tree_swap", statistic=observed, n_perm=n_perm, p_value=p)
