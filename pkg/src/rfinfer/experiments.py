"""Scenario generators and batch runners for the empirical phenomena.

Each runner is deterministic given its seed, sized for desk scale, and
returns its full configuration next to the result rows so outputs are
self-describing.  The phenomena covered:

* SNR sweep: the accuracy edge of restricted-mtry forests over bagging
  grows as the signal-to-noise ratio falls and vanishes when it is high.
* Augmented bagging: appending pure-noise features to a bagged forest
  can lower test error at low SNR (randomness as regularization).
* Correlated null pair: permute-and-repredict importance inflates a
  feature that is correlated with a real driver but conditionally inert;
  drop-and-rebuild does not.
* Cardinality: split-gain importance favors many-valued null features.
* Migration demo: a synthetic stand-in for a seasonal field study — a
  covariate collinear with day-of-year is replaced by its per-day
  anomaly, then tested region by region on a grid of query points.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import Dataset, augment_noise, from_arrays
from .errors import UnknownScenarioError
from .forest import Forest, ForestParams, fit_forest, predict_matrix
from .importance import impurity_importance, oob_permutation_importance, rebuild_importance
from .inference import TestResult, Transform, chi2_test, fit_paired, tree_swap_test
from .tree import TreeParams
from .utils import TAG_SCENARIO, rng_at

SCENARIOS = (
    "snr_sweep",
    "augmented_bagging",
    "correlated_pair",
    "cardinality",
    "migration_demo",
)


# ---------------------------------------------------------------- #
# Generators
# ---------------------------------------------------------------- #


@dataclass(frozen=True)
class LinearScenario:
    """Gaussian linear generator with AR(1) feature correlation.

    ``y = X beta + eps`` with ``corr(X_a, X_b) = rho^|a-b|``, ``beta``
    having ``s`` leading unit entries, and noise variance
    ``Var(X beta) / snr`` (the theoretical signal variance, so the SNR
    holds by construction).
    """

    n: int = 500
    p: int = 20
    s: int = 5
    rho: float = 0.0
    snr: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.s <= self.p:
            raise ValueError("s must lie in [0, p]")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.snr <= 0:
            raise ValueError("snr must be positive")

    def signal_variance(self) -> float:
        idx = np.arange(self.s)
        return float(np.sum(self.rho ** np.abs(idx[:, None] - idx[None, :])))


@dataclass(frozen=True)
class SweepRow:
    """One (scenario, snr, method) cell of a sweep table."""

    scenario: str
    snr: float
    method: str
    mean_mse: float
    se: float
    replicates: int

    def __post_init__(self) -> None:
        if self.se < 0:
            raise ValueError("standard error must be nonnegative")


def _draw_linear(sc: LinearScenario, rng: np.random.Generator, n: int) -> Dataset:
    z = rng.standard_normal((n, sc.p))
    X = np.empty_like(z)
    X[:, 0] = z[:, 0]
    scale = math.sqrt(1.0 - sc.rho**2)
    for j in range(1, sc.p):
        X[:, j] = sc.rho * X[:, j - 1] + scale * z[:, j]
    signal = X[:, : sc.s].sum(axis=1) if sc.s else np.zeros(n)
    sigma = math.sqrt(sc.signal_variance() / sc.snr) if sc.s else 1.0
    y = signal + sigma * rng.standard_normal(n)
    return from_arrays(X, y)


def gen_linear(sc: LinearScenario, n_test: int = 1000) -> tuple[Dataset, Dataset]:
    """Train/test pair from the same linear generator draw."""
    rng = rng_at(sc.seed, TAG_SCENARIO)
    return _draw_linear(sc, rng, sc.n), _draw_linear(sc, rng, n_test)


def gen_correlated_null_pair(
    n: int, rho: float, seed: int, noise_sd: float = 0.5
) -> Dataset:
    """Three features: x1 drives y, x2 mirrors x1 but is conditionally inert.

    ``(x1, x2)`` are bivariate Gaussian with correlation ``rho``, ``x3``
    is independent, and ``y = x1 + x3 + noise`` — so x2 carries no signal
    beyond x1 while matching x3's marginal relevance through x1.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    rng = rng_at(seed, TAG_SCENARIO)
    x1 = rng.standard_normal(n)
    x2 = rho * x1 + math.sqrt(1.0 - rho**2) * rng.standard_normal(n)
    x3 = rng.standard_normal(n)
    y = x1 + x3 + noise_sd * rng.standard_normal(n)
    return from_arrays(np.column_stack([x1, x2, x3]), y, names=("x1", "x2", "x3"))


def gen_cardinality(n: int, distinct_counts: list[int], seed: int) -> Dataset:
    """Null features that differ only in their number of distinct values.

    Feature ``i`` is uniform over ``distinct_counts[i]`` evenly spaced
    values; the response is pure standard Gaussian noise independent of
    every feature.
    """
    if any(c < 2 for c in distinct_counts):
        raise ValueError("each distinct count must be >= 2")
    rng = rng_at(seed, TAG_SCENARIO)
    cols = [
        rng.integers(0, c, size=n).astype(np.float64) / (c - 1)
        for c in distinct_counts
    ]
    y = rng.standard_normal(n)
    return from_arrays(np.column_stack(cols), y)


# ---------------------------------------------------------------- #
# SNR sweep
# ---------------------------------------------------------------- #


def _default_bagging(base: LinearScenario) -> ForestParams:
    return ForestParams(
        B=60,
        k=math.ceil(base.n / 3),
        scheme="subsample",
        tree=TreeParams(min_leaf=5, mtry=base.p),
    )


def _default_rf(base: LinearScenario) -> ForestParams:
    return ForestParams(
        B=60,
        k=math.ceil(base.n / 3),
        scheme="subsample",
        tree=TreeParams(min_leaf=5, mtry=max(1, base.p // 3)),
    )


def _test_mse(forest: Forest, test: Dataset) -> float:
    return float(np.mean((predict_matrix(forest, test.X) - test.y) ** 2))


@dataclass
class SweepResult:
    config: dict
    rows: list[SweepRow]
    improvements: list[dict]  # per snr: relative RF-over-bagging gain


def run_snr_sweep(
    snr_grid: list[float],
    base: LinearScenario,
    replicates: int = 50,
    params_bagging: ForestParams | None = None,
    params_rf: ForestParams | None = None,
    n_test: int = 1000,
    workers: int = 1,
) -> SweepResult:
    """Bagging (mtry = p) versus restricted-mtry forests across SNR levels.

    Each cell reports the mean held-out MSE with its standard error; per
    level the relative improvement ``(MSE_bag - MSE_rf) / MSE_bag`` is
    summarized from per-replicate paired ratios.
    """
    if len(snr_grid) < 1 or replicates < 2:
        raise ValueError("need at least one SNR level and two replicates")
    params_bagging = params_bagging if params_bagging is not None else _default_bagging(base)
    params_rf = params_rf if params_rf is not None else _default_rf(base)
    rows: list[SweepRow] = []
    improvements: list[dict] = []
    for si, snr in enumerate(snr_grid):
        mse = {"bagging": np.empty(replicates), "rf": np.empty(replicates)}
        for rep in range(replicates):
            sc = replace(base, snr=snr, seed=int(rng_at(base.seed, TAG_SCENARIO, si, rep).integers(2**62)))
            train, test = gen_linear(sc, n_test=n_test)
            fit_seed = sc.seed + 1
            for method, params in (("bagging", params_bagging), ("rf", params_rf)):
                forest = fit_forest(train, replace(params, seed=fit_seed), workers=workers)
                mse[method][rep] = _test_mse(forest, test)
        for method in ("bagging", "rf"):
            rows.append(
                SweepRow(
                    scenario="snr_sweep",
                    snr=snr,
                    method=method,
                    mean_mse=float(mse[method].mean()),
                    se=float(mse[method].std(ddof=1) / math.sqrt(replicates)),
                    replicates=replicates,
                )
            )
        rel = (mse["bagging"] - mse["rf"]) / mse["bagging"]
        improvements.append(
            {
                "snr": snr,
                "improvement": float(rel.mean()),
                "se": float(rel.std(ddof=1) / math.sqrt(replicates)),
            }
        )
    config = {
        "scenario": "snr_sweep",
        "base": asdict(base),
        "snr_grid": list(snr_grid),
        "replicates": replicates,
        "n_test": n_test,
        "mtry_bagging": params_bagging.tree.mtry,
        "mtry_rf": params_rf.tree.mtry,
        "B": params_bagging.B,
        "k": params_bagging.k,
    }
    return SweepResult(config=config, rows=rows, improvements=improvements)


# ---------------------------------------------------------------- #
# Augmented bagging
# ---------------------------------------------------------------- #


@dataclass
class AugmentedBaggingResult:
    config: dict
    rows: list[SweepRow]
    diff_mean: float  # baseline MSE - augmented MSE (positive: noise helped)
    diff_se: float
    noise_test: TestResult


def run_augmented_bagging(
    base: LinearScenario,
    q: int = 50,
    replicates: int = 50,
    params: ForestParams | None = None,
    n_test: int = 1000,
    noise_test_transform: str = "drop",
    n_perm: int = 499,
    workers: int = 1,
) -> AugmentedBaggingResult:
    """Bagging on the original features versus on ``q`` appended noise columns.

    Both forests use mtry equal to their full feature count, so the noise
    block dilutes split choices exactly as a random feature restriction
    would.  A tree-swap test of the noise block (dropped, or jointly
    permuted, in the paired forest) accompanies the sweep.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if params is None:
        params = ForestParams(
            B=40, k=math.ceil(base.n / 3), scheme="subsample", tree=TreeParams(min_leaf=5)
        )
    mse_base = np.empty(replicates)
    mse_aug = np.empty(replicates)
    for rep in range(replicates):
        sc = replace(base, seed=int(rng_at(base.seed, TAG_SCENARIO, 0, rep).integers(2**62)))
        train, test = gen_linear(sc, n_test=n_test)
        train_aug = augment_noise(train, q, seed=sc.seed + 1)
        test_aug = augment_noise(test, q, seed=sc.seed + 2)
        p_base = replace(params, seed=sc.seed + 3, tree=replace(params.tree, mtry=train.p))
        p_aug = replace(params, seed=sc.seed + 3, tree=replace(params.tree, mtry=train_aug.p))
        mse_base[rep] = _test_mse(fit_forest(train, p_base, workers=workers), test)
        mse_aug[rep] = _test_mse(fit_forest(train_aug, p_aug, workers=workers), test_aug)
    rows = [
        SweepRow(
            scenario="augmented_bagging",
            snr=base.snr,
            method=method,
            mean_mse=float(vals.mean()),
            se=float(vals.std(ddof=1) / math.sqrt(replicates)),
            replicates=replicates,
        )
        for method, vals in (("baseline_bagging", mse_base), ("augmented_bagging", mse_aug))
    ]
    diffs = mse_base - mse_aug

    # One demonstration test at the base seed: does the noise block make a
    # significant accuracy contribution to the augmented model?
    sc0 = replace(base, seed=int(rng_at(base.seed, TAG_SCENARIO, 1).integers(2**62)))
    train, test = gen_linear(sc0, n_test=n_test)
    train_aug = augment_noise(train, q, seed=sc0.seed + 1)
    test_aug = augment_noise(test, q, seed=sc0.seed + 2)
    noise_block = tuple(range(train.p, train_aug.p))
    kind = "drop" if noise_test_transform == "drop" else "permute"
    n_z = max(2, params.B // 4)
    n_mc = 4
    paired_params = replace(
        params,
        B=n_z * n_mc,
        seed=sc0.seed + 3,
        tree=replace(params.tree, mtry=train_aug.p),
    )
    paired, _ = fit_paired(
        train_aug,
        paired_params,
        Transform(kind=kind, features=noise_block),
        points=test_aug.X[:1],
        n_z=n_z,
        n_mc=n_mc,
        workers=workers,
    )
    noise_test = tree_swap_test(paired, test_aug, n_perm=n_perm, seed=sc0.seed + 4)

    config = {
        "scenario": "augmented_bagging",
        "base": asdict(base),
        "q": q,
        "replicates": replicates,
        "n_test": n_test,
        "B": params.B,
        "k": params.k,
        "noise_test_transform": noise_test_transform,
        "n_perm": n_perm,
    }
    return AugmentedBaggingResult(
        config=config,
        rows=rows,
        diff_mean=float(diffs.mean()),
        diff_se=float(diffs.std(ddof=1) / math.sqrt(replicates)),
        noise_test=noise_test,
    )


# ---------------------------------------------------------------- #
# Importance-bias harnesses
# ---------------------------------------------------------------- #


@dataclass
class CorrelatedPairResult:
    config: dict
    rows: list[dict]  # per replicate: oob scores and drop-rebuild score
    frac_oob_x2_above_x3: float
    drop_x2_mean: float
    drop_x2_se: float


def run_correlated_pair(
    n: int = 300,
    rho: float = 0.9,
    replicates: int = 100,
    seed: int = 0,
    params: ForestParams | None = None,
    n_eval: int = 300,
    workers: int = 1,
) -> CorrelatedPairResult:
    """Replicates the correlated-pair importance inflation.

    Out-of-bag permute-and-repredict scores for the conditionally inert
    x2 are compared against the genuinely informative x3; drop-rebuild
    scores for x2 are recorded as the corrective contrast.
    """
    if params is None:
        params = ForestParams(
            B=100, k=math.ceil(n / 2), scheme="subsample", tree=TreeParams(min_leaf=5, mtry=1)
        )
    rows: list[dict] = []
    above = 0
    drops = np.empty(replicates)
    for rep in range(replicates):
        rep_seed = int(rng_at(seed, TAG_SCENARIO, rep).integers(2**62))
        ds = gen_correlated_null_pair(n + n_eval, rho, rep_seed)
        train = from_arrays(ds.X[:n], ds.y[:n], names=ds.names)
        eval_ds = from_arrays(ds.X[n:], ds.y[n:], names=ds.names)
        forest = fit_forest(train, replace(params, seed=rep_seed + 1), workers=workers)
        oob = oob_permutation_importance(forest, train, seed=rep_seed + 2)
        drop = rebuild_importance(
            train,
            replace(params, seed=rep_seed + 3),
            j=1,
            mode="drop",
            eval_ds=eval_ds,
            seed=rep_seed + 4,
            workers=workers,
        )
        drops[rep] = drop
        s = dict(zip(train.names, oob.scores))
        above += int(s["x2"] > s["x3"])
        rows.append(
            {
                "rep": rep,
                "oob_x1": float(s["x1"]),
                "oob_x2": float(s["x2"]),
                "oob_x3": float(s["x3"]),
                "drop_x2": float(drop),
            }
        )
    config = {
        "scenario": "correlated_pair",
        "n": n,
        "rho": rho,
        "replicates": replicates,
        "seed": seed,
        "B": params.B,
        "k": params.k,
        "mtry": params.tree.mtry,
        "n_eval": n_eval,
    }
    return CorrelatedPairResult(
        config=config,
        rows=rows,
        frac_oob_x2_above_x3=above / replicates,
        drop_x2_mean=float(drops.mean()),
        drop_x2_se=float(drops.std(ddof=1) / math.sqrt(replicates)),
    )


@dataclass
class CardinalityResult:
    config: dict
    rows: list[dict]
    frac_high_card_first: float
    swap_rejection_rates: dict[str, float]


def run_cardinality(
    n: int = 300,
    distinct_counts: tuple[int, int] = (2, 1000),
    replicates: int = 100,
    seed: int = 0,
    params: ForestParams | None = None,
    swap_alpha: float = 0.05,
    n_perm: int = 199,
    workers: int = 1,
) -> CardinalityResult:
    """Split-count bias demo: all features are null, cardinalities differ.

    Tracks how often the highest-cardinality feature tops the impurity
    ranking, and runs a tree-swap test per feature (which, being a valid
    test on null features, should reject only at its size).
    """
    if params is None:
        params = ForestParams(
            B=50,
            k=math.ceil(n / 2),
            scheme="subsample",
            tree=TreeParams(min_leaf=5, mtry=len(distinct_counts)),
        )
    n_z = max(2, params.B // 5)
    n_mc = 5
    swap_params = replace(params, B=n_z * n_mc)
    rows: list[dict] = []
    high_first = 0
    high_j = int(np.argmax(distinct_counts))
    rejections = {name: 0 for name in (f"x{j + 1}" for j in range(len(distinct_counts)))}
    for rep in range(replicates):
        rep_seed = int(rng_at(seed, TAG_SCENARIO, rep).integers(2**62))
        ds = gen_cardinality(2 * n, list(distinct_counts), rep_seed)
        train = from_arrays(ds.X[:n], ds.y[:n], names=ds.names)
        eval_ds = from_arrays(ds.X[n:], ds.y[n:], names=ds.names)
        forest = fit_forest(train, replace(params, seed=rep_seed + 1), workers=workers)
        imp = impurity_importance(forest)
        high_first += int(np.argmax(imp.scores) == high_j)
        row = {"rep": rep}
        for j, name in enumerate(train.names):
            row[f"impurity_{name}"] = float(imp.scores[j])
            paired, _ = fit_paired(
                train,
                replace(swap_params, seed=rep_seed + 2 + j),
                Transform(kind="permute", features=(j,)),
                points=train.X[:1],
                n_z=n_z,
                n_mc=n_mc,
                workers=workers,
            )
            res = tree_swap_test(paired, eval_ds, n_perm=n_perm, seed=rep_seed + 10 + j)
            row[f"swap_p_{name}"] = res.p_value
            rejections[name] += int(res.p_value < swap_alpha)
        rows.append(row)
    config = {
        "scenario": "cardinality",
        "n": n,
        "distinct_counts": list(distinct_counts),
        "replicates": replicates,
        "seed": seed,
        "B": params.B,
        "k": params.k,
        "n_perm": n_perm,
        "swap_alpha": swap_alpha,
    }
    return CardinalityResult(
        config=config,
        rows=rows,
        frac_high_card_first=high_first / replicates,
        swap_rejection_rates={k: v / replicates for k, v in rejections.items()},
    )


# ---------------------------------------------------------------- #
# Migration demo
# ---------------------------------------------------------------- #


@dataclass(frozen=True)
class MigrationConfig:
    """Synthetic seasonal-field-study generator settings."""

    n_per_region: int = 600
    n_regions: int = 2
    effect: float = 1.0
    day_lo: int = 200
    day_hi: int = 320
    anomaly_sd: float = 2.0
    noise_sd: float = 0.1
    k: int = 60
    n_z: int = 60
    n_mc: int = 5
    n_levels: int = 5
    n_complements: int = 5


def gen_migration_region(
    seed: int, region: int, cfg: MigrationConfig
) -> Dataset:
    """One region's raw table: day of year, temperature, observation effort.

    Temperature is a declining seasonal curve in day plus an anomaly; the
    presence-style response follows a logistic migration curve in day
    plus ``effect * 0.05 * anomaly`` and observation noise.  Temperature
    is deliberately collinear with day — the analysis must orthogonalize.
    """
    rng = rng_at(seed, TAG_SCENARIO, region)
    n = cfg.n_per_region
    day = rng.integers(cfg.day_lo, cfg.day_hi + 1, size=n).astype(np.float64)
    anomaly = cfg.anomaly_sd * rng.standard_normal(n)
    temp = 25.0 - 0.12 * (day - cfg.day_lo) + 1.5 * region + anomaly
    effort = rng.standard_normal(n)
    midpoint = 250.0 + 12.0 * region
    curve = 1.0 / (1.0 + np.exp((day - midpoint) / 6.0))
    y = curve + cfg.effect * 0.05 * anomaly + cfg.noise_sd * rng.standard_normal(n)
    return from_arrays(
        np.column_stack([day, temp, effort]), y, names=("day", "temp", "effort")
    )


def orthogonalize_daily(ds: Dataset, value: str, day: str) -> Dataset:
    """Replace a covariate by its difference from the per-day mean.

    Used when a covariate is so collinear with day-of-year that permuting
    raw values would fabricate impossible days; the anomaly isolates the
    within-day signal and is uncorrelated with day by construction.
    """
    vj = ds.feature_index(value)
    dj = ds.feature_index(day)
    days = ds.X[:, dj]
    vals = ds.X[:, vj]
    X = ds.X.copy()
    out = np.empty_like(vals)
    for d in np.unique(days):
        mask = days == d
        out[mask] = vals[mask] - vals[mask].mean()
    X[:, vj] = out
    names = tuple(f"{value}_anom" if i == vj else nm for i, nm in enumerate(ds.names))
    return Dataset(X, ds.y, ds.kinds, ds.levels, names)


@dataclass
class MigrationDemoResult:
    config: dict
    region_results: list[TestResult]
    rows: list[dict]


def run_migration_demo(
    seed: int,
    cfg: MigrationConfig | None = None,
    workers: int = 1,
) -> MigrationDemoResult:
    """Per-region grid test of the orthogonalized temperature anomaly.

    For each region: generate data, replace temperature by its per-day
    anomaly, fit paired forests (anomaly permuted in the second), and
    chi-square test the prediction differences on a
    ``n_levels x n_complements`` grid of query points (stabilized, since
    grids of evaluations make raw covariances unstable).
    """
    cfg = cfg if cfg is not None else MigrationConfig()
    results: list[TestResult] = []
    rows: list[dict] = []
    for region in range(cfg.n_regions):
        raw = gen_migration_region(seed, region, cfg)
        ds = orthogonalize_daily(raw, "temp", "day")
        j = ds.feature_index("temp_anom")
        rng = rng_at(seed, TAG_SCENARIO, region, 1)
        qs = np.linspace(0.1, 0.9, cfg.n_levels)
        levels = np.quantile(ds.X[:, j], qs)
        comp_rows = rng.choice(ds.n, size=cfg.n_complements, replace=False)
        pts = np.tile(ds.X[comp_rows], (cfg.n_levels, 1))
        pts[:, j] = np.repeat(levels, cfg.n_complements)
        params = ForestParams(
            B=cfg.n_z * cfg.n_mc,
            k=cfg.k,
            scheme="subsample",
            tree=TreeParams(min_leaf=5, mtry=1),
            seed=int(rng.integers(2**62)),
        )
        _, mom = fit_paired(
            ds,
            params,
            Transform(kind="permute", features=(j,)),
            points=pts,
            n_z=cfg.n_z,
            n_mc=cfg.n_mc,
            workers=workers,
        )
        res = chi2_test(mom.mean, mom.cov, stabilize="always", method="paired_chi2")
        results.append(res)
        rows.append(
            {
                "region": region,
                "statistic": res.statistic,
                "dof": res.dof,
                "p_value": res.p_value,
                "projection_dim": res.projection_dim,
            }
        )
    config = {"scenario": "migration_demo", "seed": seed, **asdict(cfg)}
    return MigrationDemoResult(config=config, region_results=results, rows=rows)


def run_scenario(name: str, seed: int = 0, workers: int = 1, **overrides):
    """Dispatch a named scenario with keyword overrides (CLI entry)."""
    if name == "snr_sweep":
        base = LinearScenario(seed=seed, **overrides.pop("base", {}))
        return run_snr_sweep(
            overrides.pop("snr_grid", [0.1, 1.0, 10.0]),
            base,
            workers=workers,
            **overrides,
        )
    if name == "augmented_bagging":
        base_kw = {"n": 500, "p": 10, "s": 5, "snr": 0.1}
        base_kw.update(overrides.pop("base", {}))
        return run_augmented_bagging(
            LinearScenario(seed=seed, **base_kw), workers=workers, **overrides
        )
    if name == "correlated_pair":
        return run_correlated_pair(seed=seed, workers=workers, **overrides)
    if name == "cardinality":
        return run_cardinality(seed=seed, workers=workers, **overrides)
    if name == "migration_demo":
        cfg = MigrationConfig(**overrides.pop("config", {})) if "config" in overrides else None
        return run_migration_demo(seed, cfg=cfg, workers=workers, **overrides)
    raise UnknownScenarioError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
