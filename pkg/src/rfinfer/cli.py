"""Batch command-line surface: train, ci, test, importance, simulate.

Every command takes ``--seed`` and is bit-reproducible given it; worker
count never changes results.  Human-readable chatter goes to stderr;
files (and stdout, when ``--stdout`` is passed) carry only
machine-readable payloads.  Exit codes: 0 success, 1 runtime failure,
2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from .data import CATEGORICAL, Dataset, NUMERIC, load_csv
from .errors import RfinferError, SchemeUnsupportedError, UnknownFeatureError
from .experiments import SCENARIOS, run_scenario
from .forest import Forest, ForestParams, fit_forest, load_model, oob_error, save_model
from .importance import REBUILD_MODES, impurity_importance, oob_permutation_importance, rebuild_importance
from .inference import (
    TestResult,
    Transform,
    confidence_interval,
    fit_paired,
    moments_from_forest,
    paired_difference_test,
    test_interaction,
    tree_swap_test,
)
from .tree import TreeParams
from .utils import TAG_GRID, rng_at

_FOREST_DEFAULTS = {
    "b": 500,
    "k": None,
    "scheme": "subsample",
    "mtry": None,
    "min_leaf": 5,
    "alpha": 0.0,
    "honest": False,
    "seed": 0,
    "workers": 1,
    "level": 0.95,
    "n_z": 50,
    "n_mc": 20,
    "n_perm": 499,
}


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _effective(args: argparse.Namespace) -> dict:
    """Built-in defaults, overridden by --config JSON, overridden by flags."""
    merged = dict(_FOREST_DEFAULTS)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        with open(cfg_path, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(_FOREST_DEFAULTS)
        if unknown:
            raise RfinferError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for key in _FOREST_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _forest_params(opts: dict, b: int | None = None) -> ForestParams:
    return ForestParams(
        B=b if b is not None else opts["b"],
        k=opts["k"],
        scheme=opts["scheme"],
        seed=opts["seed"],
        tree=TreeParams(
            min_leaf=opts["min_leaf"],
            mtry=opts["mtry"],
            random_split_prob=opts["alpha"],
            honest=bool(opts["honest"]),
            seed=opts["seed"],
        ),
    )


def _load_train(args: argparse.Namespace) -> Dataset:
    with open(args.schema, encoding="utf-8") as fh:
        schema = json.load(fh)
    return load_csv(args.train, schema)


def _emit(path: str | None, payload: str, to_stdout: bool) -> None:
    if path:
        Path(path).write_text(payload, encoding="utf-8")
    if to_stdout or not path:
        sys.stdout.write(payload)


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ": "), indent=1) + "\n"


def _rows_to_csv(rows: list[dict], fieldnames: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def points_from_csv(path: str, forest: Forest) -> np.ndarray:
    """Parse query points against a fitted forest's feature schema."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    missing = [name for name in forest.feature_names if name not in header]
    if missing:
        raise UnknownFeatureError(f"points file lacks feature columns {missing}")
    col_of = {name: header.index(name) for name in forest.feature_names}
    out = np.empty((len(rows), forest.p))
    for r, row in enumerate(rows):
        for j, name in enumerate(forest.feature_names):
            cell = row[col_of[name]].strip()
            if forest.kinds[j] == NUMERIC:
                out[r, j] = float(cell)
            else:
                levels = forest.levels[j]
                assert levels is not None
                if cell not in levels:
                    raise UnknownFeatureError(
                        f"unknown level {cell!r} for categorical feature {name!r}"
                    )
                out[r, j] = levels.index(cell)
    return out


def _report_payload(result: TestResult, points: np.ndarray | None, config: dict) -> str:
    report = result.to_dict()
    report["points"] = points.tolist() if points is not None else None
    report["config"] = config
    return _json_dumps(report)


def _default_grid(ds: Dataset, j: int, n_levels: int, n_complements: int, seed: int):
    """Quantile levels for the tested feature, seeded complement rows."""
    if ds.kinds[j] == CATEGORICAL:
        levels = np.unique(ds.X[:, j])[:n_levels]
    else:
        qs = np.linspace(0.1, 0.9, n_levels)
        levels = np.unique(np.quantile(ds.X[:, j], qs))
    rows = rng_at(seed, TAG_GRID, j).choice(ds.n, size=min(n_complements, ds.n), replace=False)
    return levels, ds.X[rows]


# ---------------------------------------------------------------- #
# Commands
# ---------------------------------------------------------------- #


def cmd_train(args: argparse.Namespace) -> int:
    opts = _effective(args)
    ds = _load_train(args)
    params = _forest_params(opts)
    forest = fit_forest(ds, params, workers=opts["workers"])
    save_model(forest, args.out_model)
    _say(f"trained {forest.B} trees on {ds.n} rows, {ds.p} features")
    try:
        mse = oob_error(forest, ds)
        _say(f"oob mse: {mse:.6g}")
    except RfinferError:
        _say("oob mse: unavailable (no out-of-bag rows under this scheme)")
    if args.stdout:
        sys.stdout.write(Path(args.out_model).read_text(encoding="utf-8"))
    return 0


def cmd_ci(args: argparse.Namespace) -> int:
    opts = _effective(args)
    if args.model:
        forest = load_model(args.model)
        if forest.groups is None:
            raise SchemeUnsupportedError(
                "model was not trained with anchored groups; pass --train/--schema to refit"
            )
        pts = points_from_csv(args.points, forest)
        mom = moments_from_forest(forest, pts)
    else:
        if not (args.train and args.schema):
            raise RfinferError("ci needs either --model or --train plus --schema")
        ds = _load_train(args)
        from .inference import estimate_moments

        params = _forest_params(opts, b=opts["n_z"] * opts["n_mc"])
        probe = fit_forest(
            ds, _forest_params(opts, b=1), workers=1
        )  # schema holder for point parsing
        pts = points_from_csv(args.points, probe)
        _, mom = estimate_moments(
            ds, params, pts, n_z=opts["n_z"], n_mc=opts["n_mc"], workers=opts["workers"]
        )
    rows = []
    for i in range(mom.mean.shape[0]):
        lo, hi = confidence_interval(mom, i, opts["level"])
        rows.append(
            {
                "point": i,
                "prediction": repr(float(mom.mean[i])),
                "half_width": repr(float(0.5 * (hi - lo))),
                "lo": repr(lo),
                "hi": repr(hi),
            }
        )
    payload = _rows_to_csv(rows, ["point", "prediction", "half_width", "lo", "hi"])
    _emit(args.out, payload, args.stdout)
    _say(f"wrote {len(rows)} intervals at level {opts['level']}")
    return 0


def cmd_test(args: argparse.Namespace) -> int:
    opts = _effective(args)
    ds = _load_train(args)
    if args.feature not in ds.names:
        raise UnknownFeatureError(f"unknown feature {args.feature!r}")
    j = ds.feature_index(args.feature)
    n_z, n_mc = opts["n_z"], opts["n_mc"]
    params = _forest_params(opts, b=n_z * n_mc)
    points: np.ndarray | None = None

    if args.method == "chi2":
        rows = rng_at(opts["seed"], TAG_GRID).choice(
            ds.n, size=min(args.points_count, ds.n), replace=False
        )
        points = ds.X[rows]
        _, result = paired_difference_test(
            ds,
            params,
            Transform(kind=args.transform, features=(j,)),
            points,
            n_z=n_z,
            n_mc=n_mc,
            stabilize=args.stabilize,
            workers=opts["workers"],
        )
    elif args.method == "interaction":
        if not args.feature2:
            raise RfinferError("interaction test needs --feature2")
        if args.feature2 not in ds.names:
            raise UnknownFeatureError(f"unknown feature {args.feature2!r}")
        j2 = ds.feature_index(args.feature2)
        levels1, comp = _default_grid(ds, j, args.grid_levels, args.complements, opts["seed"])
        levels2, _ = _default_grid(ds, j2, args.grid_levels, args.complements, opts["seed"])
        points = None
        result = test_interaction(
            ds,
            params,
            j,
            j2,
            levels1,
            levels2,
            comp,
            n_z=n_z,
            n_mc=n_mc,
            stabilize=args.stabilize,
            workers=opts["workers"],
        )
    elif args.method == "tree_swap":
        if args.eval:
            with open(args.schema, encoding="utf-8") as fh:
                schema = json.load(fh)
            eval_ds = load_csv(args.eval, schema)
            train_ds = ds
        else:
            order = rng_at(opts["seed"], TAG_GRID, 1).permutation(ds.n)
            cut = max(1, ds.n // 4)
            eval_rows, train_rows = order[:cut], order[cut:]
            train_ds = Dataset(
                ds.X[train_rows], ds.y[train_rows], ds.kinds, ds.levels, ds.names
            )
            eval_ds = Dataset(ds.X[eval_rows], ds.y[eval_rows], ds.kinds, ds.levels, ds.names)
        paired, _ = fit_paired(
            train_ds,
            params,
            Transform(kind=args.transform, features=(j,)),
            points=train_ds.X[:1],
            n_z=n_z,
            n_mc=n_mc,
            workers=opts["workers"],
        )
        result = tree_swap_test(paired, eval_ds, n_perm=opts["n_perm"], seed=opts["seed"])
    else:  # pragma: no cover - argparse restricts choices
        raise RfinferError(f"unknown method {args.method!r}")

    config = {
        "feature": args.feature,
        "feature2": args.feature2,
        "method": args.method,
        "transform": args.transform,
        "n_z": n_z,
        "n_mc": n_mc,
        "seed": opts["seed"],
    }
    payload = _report_payload(result, points, config)
    _emit(args.out, payload, args.stdout)
    _say(f"{args.method}: statistic={result.statistic:.6g} p={result.p_value:.4g}")
    return 0


def cmd_importance(args: argparse.Namespace) -> int:
    opts = _effective(args)
    ds = _load_train(args)
    with open(args.schema, encoding="utf-8") as fh:
        schema = json.load(fh)
    eval_ds = load_csv(args.eval, schema) if args.eval else None
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    known = {"oob_permute", "impurity"} | set(REBUILD_MODES.values())
    unknown = [m for m in methods if m not in known]
    if unknown:
        raise RfinferError(f"unknown importance methods: {unknown}")

    params = _forest_params(opts)
    rows: list[dict] = []
    base_forest: Forest | None = None
    if "oob_permute" in methods or "impurity" in methods:
        base_forest = fit_forest(ds, params, workers=opts["workers"])
    if "oob_permute" in methods:
        assert base_forest is not None
        rows.extend(oob_permutation_importance(base_forest, ds, seed=opts["seed"]).to_rows())
    if "impurity" in methods:
        assert base_forest is not None
        rows.extend(impurity_importance(base_forest).to_rows())
    mode_of = {tag: mode for mode, tag in REBUILD_MODES.items()}
    for method in methods:
        if method in mode_of:
            if eval_ds is None:
                raise RfinferError(f"{method} needs --eval data")
            for j, name in enumerate(ds.names):
                score = rebuild_importance(
                    ds,
                    params,
                    j,
                    mode_of[method],
                    eval_ds,
                    seed=opts["seed"] + j,
                    workers=opts["workers"],
                )
                rows.append({"feature": name, "method": method, "score": score, "caveat": ""})
    payload = _rows_to_csv(
        [
            {**row, "score": repr(float(row["score"]))}
            for row in rows
        ],
        ["feature", "method", "score", "caveat"],
    )
    _emit(args.out, payload, args.stdout)
    _say(f"computed {len(methods)} importance methods over {ds.p} features")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    opts = _effective(args)
    overrides = {}
    if args.scenario_config:
        with open(args.scenario_config, encoding="utf-8") as fh:
            overrides = json.load(fh)
    if args.replicates is not None:
        overrides["replicates"] = args.replicates
    result = run_scenario(
        args.scenario, seed=opts["seed"], workers=opts["workers"], **overrides
    )

    rows = [asdict(r) if is_dataclass(r) else dict(r) for r in result.rows]
    fieldnames = sorted({key for row in rows for key in row})
    csv_rows = [
        {k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()} for row in rows
    ]
    payload = _rows_to_csv(csv_rows, fieldnames)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    results_path.write_text(payload, encoding="utf-8")

    manifest = {
        "config": result.config,
        "digest": hashlib.sha256(payload.encode("utf-8")).hexdigest(),
        "rows": len(rows),
    }
    for extra in ("improvements", "diff_mean", "diff_se", "frac_oob_x2_above_x3",
                  "drop_x2_mean", "drop_x2_se", "frac_high_card_first",
                  "swap_rejection_rates"):
        if hasattr(result, extra):
            manifest[extra] = getattr(result, extra)
    if hasattr(result, "noise_test"):
        manifest["noise_test"] = result.noise_test.to_dict()
    if hasattr(result, "region_results"):
        manifest["region_results"] = [r.to_dict() for r in result.region_results]
    (out_dir / "manifest.json").write_text(_json_dumps(manifest), encoding="utf-8")
    if args.stdout:
        sys.stdout.write(payload)
    _say(f"wrote {results_path} ({len(rows)} rows) and manifest.json")
    return 0


# ---------------------------------------------------------------- #
# Parser
# ---------------------------------------------------------------- #


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON file of defaults; flags override")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--stdout", action="store_true", help="also write payload to stdout")
    sp.add_argument("--b", type=int, help="tree count")
    sp.add_argument("--k", type=int, help="subsample size")
    sp.add_argument("--scheme", choices=["bootstrap", "subsample", "subsample_with_replacement"])
    sp.add_argument("--mtry", type=int)
    sp.add_argument("--min-leaf", dest="min_leaf", type=int)
    sp.add_argument("--alpha", type=float, help="random-split probability")
    sp.add_argument("--honest", action="store_const", const=True, default=None)
    sp.add_argument("--n-z", dest="n_z", type=int, help="anchor group count")
    sp.add_argument("--n-mc", dest="n_mc", type=int, help="trees per anchor group")
    sp.add_argument("--n-perm", dest="n_perm", type=int)
    sp.add_argument("--level", type=float, help="confidence level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfinfer",
        description="Random forests with variance estimates and hypothesis tests",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit and persist a forest")
    p_train.add_argument("--train", required=True, help="training CSV")
    p_train.add_argument("--schema", required=True, help="JSON column-role schema")
    p_train.add_argument("--out-model", required=True, help="model JSON output path")
    _add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_ci = sub.add_parser("ci", help="confidence intervals at query points")
    p_ci.add_argument("--model", help="model JSON with anchored groups")
    p_ci.add_argument("--train", help="training CSV (refit with grouped structure)")
    p_ci.add_argument("--schema", help="JSON column-role schema")
    p_ci.add_argument("--points", required=True, help="CSV of query points")
    p_ci.add_argument("--out", help="intervals CSV output path")
    _add_common(p_ci)
    p_ci.set_defaults(func=cmd_ci)

    p_test = sub.add_parser("test", help="hypothesis tests for feature effects")
    p_test.add_argument("--train", required=True)
    p_test.add_argument("--schema", required=True)
    p_test.add_argument("--feature", required=True)
    p_test.add_argument("--feature2", help="second feature for interaction tests")
    p_test.add_argument("--method", required=True, choices=["chi2", "interaction", "tree_swap"])
    p_test.add_argument(
        "--transform",
        default="permute",
        choices=["permute", "drop", "conditional_permute"],
        help="training-data alteration for paired tests",
    )
    p_test.add_argument("--eval", help="held-out CSV for tree_swap (default: split train)")
    p_test.add_argument("--points-count", dest="points_count", type=int, default=5)
    p_test.add_argument("--grid-levels", dest="grid_levels", type=int, default=3)
    p_test.add_argument("--complements", type=int, default=2)
    p_test.add_argument("--stabilize", default="auto", choices=["auto", "always", "never"])
    p_test.add_argument("--out", help="report JSON output path")
    _add_common(p_test)
    p_test.set_defaults(func=cmd_test)

    p_imp = sub.add_parser("importance", help="variable importance reports")
    p_imp.add_argument("--train", required=True)
    p_imp.add_argument("--schema", required=True)
    p_imp.add_argument("--eval", help="held-out CSV for rebuild measures")
    p_imp.add_argument(
        "--methods",
        default="oob_permute,impurity",
        help="comma list: oob_permute,impurity,permute_rebuild,drop_rebuild,"
        "conditional_permute_rebuild",
    )
    p_imp.add_argument("--out", help="importance CSV output path")
    _add_common(p_imp)
    p_imp.set_defaults(func=cmd_importance)

    p_sim = sub.add_parser("simulate", help="run a named simulation scenario")
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--out", help="output directory")
    p_sim.add_argument("--replicates", type=int)
    p_sim.add_argument(
        "--scenario-config", dest="scenario_config", help="JSON of scenario overrides"
    )
    _add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RfinferError as exc:
        _say(f"error: {exc}")
        return 2
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        _say(f"error: {exc}")
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 1
        _say(f"runtime failure: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
