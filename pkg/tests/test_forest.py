import numpy as np
import pytest

from rfinfer.data import from_arrays
from rfinfer.errors import OobCoverageError, SubsampleSizeError
from rfinfer.forest import (
    ForestParams,
    fit_forest,
    forest_to_dict,
    inbag_matrix,
    load_model,
    oob_error,
    predict,
    predict_matrix,
    save_model,
    tree_matrix,
)
from rfinfer.tree import TreeParams, predict_rows


@pytest.fixture(scope="module")
def linear_ds():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((120, 3))
    y = X[:, 0] - X[:, 1] + 0.3 * rng.standard_normal(120)
    return from_arrays(X, y)


class TestFitForest:
    def test_single_tree_subsample_all_equals_cart(self, linear_ds):
        params = ForestParams(
            B=1, k=120, scheme="subsample", tree=TreeParams(min_leaf=2, mtry=3), seed=4
        )
        forest = fit_forest(linear_ds, params)
        pts = linear_ds.X[:25]
        np.testing.assert_array_equal(
            predict_matrix(forest, pts), predict_rows(forest.trees[0], pts)
        )

    def test_constant_response(self):
        ds = from_arrays(np.random.default_rng(1).standard_normal((30, 2)), np.full(30, 2.5))
        forest = fit_forest(ds, ForestParams(B=7, k=15, seed=2, tree=TreeParams(mtry=2)))
        np.testing.assert_allclose(predict_matrix(forest, ds.X), 2.5)

    def test_determinism_same_params(self, linear_ds):
        params = ForestParams(B=12, k=60, seed=33, tree=TreeParams(min_leaf=3, mtry=2))
        a = fit_forest(linear_ds, params)
        b = fit_forest(linear_ds, params)
        assert forest_to_dict(a) == forest_to_dict(b)

    def test_worker_invariance(self, linear_ds):
        params = ForestParams(B=16, k=60, seed=9, tree=TreeParams(min_leaf=3, mtry=2))
        a = fit_forest(linear_ds, params, workers=1)
        b = fit_forest(linear_ds, params, workers=4)
        assert forest_to_dict(a) == forest_to_dict(b)

    def test_subsample_counts(self, linear_ds):
        params = ForestParams(B=10, k=40, seed=6, tree=TreeParams(mtry=2))
        forest = fit_forest(linear_ds, params)
        for tree in forest.trees:
            assert len(set(tree.in_sample.tolist())) == 40

    def test_k_too_large_without_replacement(self, linear_ds):
        with pytest.raises(SubsampleSizeError):
            fit_forest(linear_ds, ForestParams(B=2, k=121, scheme="subsample"))

    def test_bootstrap_forces_k_n(self, linear_ds):
        with pytest.raises(SubsampleSizeError):
            fit_forest(linear_ds, ForestParams(B=2, k=50, scheme="bootstrap"))

    def test_anchored_rows_present(self, linear_ds):
        required = np.arange(10).repeat(2)
        params = ForestParams(B=20, k=30, seed=5, tree=TreeParams(mtry=2))
        forest = fit_forest(linear_ds, params, required_rows=required)
        for b, tree in enumerate(forest.trees):
            assert required[b] in tree.in_sample


class TestPredict:
    def test_mean_of_trees_on_random_points(self, linear_ds):
        params = ForestParams(B=25, k=60, seed=8, tree=TreeParams(min_leaf=3, mtry=2))
        forest = fit_forest(linear_ds, params)
        pts = np.random.default_rng(3).standard_normal((50, 3))
        per_tree = np.array([predict_rows(t, pts) for t in forest.trees])
        np.testing.assert_allclose(
            predict_matrix(forest, pts), per_tree.mean(axis=0), atol=1e-12
        )

    def test_invariant_to_tree_order(self, linear_ds):
        params = ForestParams(B=10, k=50, seed=10, tree=TreeParams(mtry=2))
        forest = fit_forest(linear_ds, params)
        x = linear_ds.X[0]
        base = predict(forest, x)
        shuffled = type(forest)(
            trees=tuple(reversed(forest.trees)),
            params=forest.params,
            n_train=forest.n_train,
            feature_names=forest.feature_names,
            kinds=forest.kinds,
            levels=forest.levels,
        )
        assert predict(shuffled, x) == pytest.approx(base, abs=1e-12)


class TestOob:
    def test_full_subsample_has_no_oob(self, linear_ds):
        params = ForestParams(B=3, k=120, scheme="subsample", seed=2, tree=TreeParams(mtry=2))
        forest = fit_forest(linear_ds, params)
        with pytest.raises(OobCoverageError):
            oob_error(forest, linear_ds)

    def test_constant_response_zero_error(self):
        ds = from_arrays(np.random.default_rng(4).standard_normal((40, 2)), np.ones(40))
        forest = fit_forest(ds, ForestParams(B=10, k=20, seed=3, tree=TreeParams(mtry=2)))
        assert oob_error(forest, ds) == 0.0

    def test_bootstrap_oob_fraction_near_inverse_e(self):
        rng = np.random.default_rng(5)
        ds = from_arrays(rng.standard_normal((300, 2)), rng.standard_normal(300))
        params = ForestParams(B=40, scheme="bootstrap", seed=7, tree=TreeParams(mtry=2))
        forest = fit_forest(ds, params)
        oob_frac = 1.0 - inbag_matrix(forest).mean(axis=1)
        assert abs(oob_frac.mean() - np.exp(-1.0)) < 0.01


class TestPersistence:
    def test_roundtrip(self, linear_ds, tmp_path):
        params = ForestParams(B=6, k=60, seed=13, tree=TreeParams(min_leaf=4, mtry=2))
        forest = fit_forest(linear_ds, params)
        path = tmp_path / "model.json"
        save_model(forest, str(path))
        clone = load_model(str(path))
        pts = linear_ds.X[:15]
        np.testing.assert_array_equal(
            predict_matrix(forest, pts), predict_matrix(clone, pts)
        )
        assert clone.params == forest.params
        assert clone.feature_names == forest.feature_names

    def test_serialized_bytes_stable(self, linear_ds, tmp_path):
        params = ForestParams(B=4, k=60, seed=13, tree=TreeParams(mtry=2))
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        save_model(fit_forest(linear_ds, params), str(p1))
        save_model(fit_forest(linear_ds, params, workers=3), str(p2))
        assert p1.read_bytes() == p2.read_bytes()
