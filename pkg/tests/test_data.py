import json

import numpy as np
import pytest

from rfinfer.data import (
    Dataset,
    StrataSpec,
    augment_noise,
    conditional_permute_feature,
    default_strata,
    draw_subsample,
    drop_feature,
    from_arrays,
    load_csv,
    permute_feature,
)
from rfinfer.errors import (
    DuplicateNameError,
    EmptyFileError,
    FeatureIndexError,
    MissingValueError,
    NonNumericError,
    SchemaError,
    StrataMismatchError,
    SubsampleSizeError,
)
from rfinfer.forest import ForestParams, fit_forest
from rfinfer.tree import TreeParams


def write_csv(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


SCHEMA_2NUM = {"x1": "numeric", "x2": "numeric", "y": "response"}


class TestLoadCsv:
    def test_basic_numeric(self, tmp_path):
        path = write_csv(tmp_path, "x1,x2,y\n1,2,3\n4,5,6\n7,8,9\n")
        ds = load_csv(path, SCHEMA_2NUM)
        assert ds.n == 3 and ds.p == 2
        assert ds.names == ("x1", "x2")
        np.testing.assert_array_equal(ds.y, [3.0, 6.0, 9.0])

    def test_non_numeric_cell(self, tmp_path):
        path = write_csv(tmp_path, "x1,x2,y\n1,abc,3\n")
        with pytest.raises(NonNumericError) as err:
            load_csv(path, SCHEMA_2NUM)
        assert err.value.row == 0 and err.value.col == "x2"

    def test_categorical_first_appearance(self, tmp_path):
        path = write_csv(tmp_path, "c,y\na,1\nb,2\na,3\n")
        ds = load_csv(path, {"c": "categorical", "y": "response"})
        assert ds.levels[0] == ("a", "b")
        np.testing.assert_array_equal(ds.X[:, 0], [0.0, 1.0, 0.0])

    def test_missing_value(self, tmp_path):
        path = write_csv(tmp_path, "x1,x2,y\n1,,3\n")
        with pytest.raises(MissingValueError) as err:
            load_csv(path, SCHEMA_2NUM)
        assert err.value.col == "x2"

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyFileError):
            load_csv(write_csv(tmp_path, ""), SCHEMA_2NUM)
        with pytest.raises(EmptyFileError):
            load_csv(write_csv(tmp_path, "x1,x2,y\n"), SCHEMA_2NUM)

    def test_duplicate_header(self, tmp_path):
        path = write_csv(tmp_path, "x1,x1,y\n1,2,3\n")
        with pytest.raises(DuplicateNameError):
            load_csv(path, SCHEMA_2NUM)

    def test_schema_mismatch(self, tmp_path):
        path = write_csv(tmp_path, "x1,x9,y\n1,2,3\n")
        with pytest.raises(SchemaError):
            load_csv(path, SCHEMA_2NUM)
        with pytest.raises(SchemaError):
            load_csv(
                write_csv(tmp_path, "x1,x2,y\n1,2,3\n", "b.csv"),
                {"x1": "numeric", "x2": "numeric", "y": "numeric"},
            )

    def test_quoted_cells(self, tmp_path):
        path = write_csv(tmp_path, 'c,y\n"hello, world",1\nplain,2\n')
        ds = load_csv(path, {"c": "categorical", "y": "response"})
        assert ds.levels[0] == ("hello, world", "plain")


class TestPermute:
    def test_constant_column_identity(self):
        ds = from_arrays(np.ones((5, 2)), np.arange(5.0))
        out = permute_feature(ds, 0, seed=3)
        np.testing.assert_array_equal(out.X, ds.X)

    def test_single_row_identity(self):
        ds = from_arrays(np.array([[1.0, 2.0]]), np.array([0.0]))
        out = permute_feature(ds, 1, seed=9)
        np.testing.assert_array_equal(out.X, ds.X)

    def test_multiset_preserved_other_columns_untouched(self):
        rng = np.random.default_rng(0)
        ds = from_arrays(rng.standard_normal((100, 3)), rng.standard_normal(100))
        out = permute_feature(ds, 1, seed=11)
        np.testing.assert_array_equal(np.sort(out.X[:, 1]), np.sort(ds.X[:, 1]))
        np.testing.assert_array_equal(out.X[:, 0], ds.X[:, 0])
        np.testing.assert_array_equal(out.X[:, 2], ds.X[:, 2])
        np.testing.assert_array_equal(out.y, ds.y)
        assert not np.array_equal(out.X[:, 1], ds.X[:, 1])

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        ds = from_arrays(rng.standard_normal((30, 2)), rng.standard_normal(30))
        a = permute_feature(ds, 0, seed=5)
        b = permute_feature(ds, 0, seed=5)
        np.testing.assert_array_equal(a.X, b.X)

    def test_index_out_of_range(self):
        ds = from_arrays(np.ones((3, 1)), np.zeros(3))
        with pytest.raises(FeatureIndexError):
            permute_feature(ds, 1, seed=0)


class TestConditionalPermute:
    def test_singleton_strata_identity(self):
        rng = np.random.default_rng(2)
        ds = from_arrays(rng.standard_normal((10, 2)), rng.standard_normal(10))
        strata = StrataSpec(np.arange(10))
        out = conditional_permute_feature(ds, 0, strata, seed=4)
        np.testing.assert_array_equal(out.X, ds.X)

    def test_two_strata_multisets(self):
        rng = np.random.default_rng(3)
        ds = from_arrays(rng.standard_normal((7, 2)), rng.standard_normal(7))
        assignment = np.array([0, 0, 0, 1, 1, 1, 1])
        strata = StrataSpec(assignment)
        out = conditional_permute_feature(ds, 0, strata, seed=8)
        for sid in (0, 1):
            rows = assignment == sid
            np.testing.assert_array_equal(
                np.sort(out.X[rows, 0]), np.sort(ds.X[rows, 0])
            )

    def test_length_mismatch(self):
        ds = from_arrays(np.ones((4, 1)), np.zeros(4))
        with pytest.raises(StrataMismatchError):
            conditional_permute_feature(ds, 0, StrataSpec(np.zeros(3, dtype=int)), seed=0)

    def test_default_strata_cover_rows(self):
        rng = np.random.default_rng(4)
        ds = from_arrays(rng.standard_normal((50, 3)), rng.standard_normal(50))
        strata = default_strata(ds, 1, seed=7)
        assert strata.n == 50
        out = conditional_permute_feature(ds, 1, strata, seed=9)
        np.testing.assert_array_equal(np.sort(out.X[:, 1]), np.sort(ds.X[:, 1]))


class TestDropAugment:
    def test_drop_to_zero_features(self):
        ds = from_arrays(np.ones((4, 1)), np.arange(4.0))
        out = drop_feature(ds, 0)
        assert out.p == 0 and out.n == 4
        np.testing.assert_array_equal(out.y, ds.y)

    def test_drop_middle_keeps_order(self):
        ds = from_arrays(np.arange(12.0).reshape(4, 3), np.zeros(4))
        out = drop_feature(ds, 1)
        assert out.names == ("x1", "x3")
        np.testing.assert_array_equal(out.X, ds.X[:, [0, 2]])

    def test_dropped_feature_never_split(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((80, 3))
        y = 2.0 * X[:, 1] + 0.1 * rng.standard_normal(80)
        ds = drop_feature(from_arrays(X, y), 1)
        params = ForestParams(B=10, k=40, tree=TreeParams(min_leaf=2, mtry=2), seed=1)
        forest = fit_forest(ds, params)
        # x2 is gone: only two columns remain and both are pure noise, but no
        # tree may reference a feature index beyond the new arity.
        for tree in forest.trees:
            assert tree.n_features == 2
            assert tree.feature.max() <= 1

    def test_augment_zero_is_identity(self):
        ds = from_arrays(np.ones((3, 2)), np.zeros(3))
        assert augment_noise(ds, 0, seed=1) is ds

    def test_augment_adds_named_columns(self):
        rng = np.random.default_rng(6)
        ds = from_arrays(rng.standard_normal((20, 2)), rng.standard_normal(20))
        out = augment_noise(ds, 5, seed=2)
        assert out.p == 7
        assert out.names[-5:] == ("noise_1", "noise_2", "noise_3", "noise_4", "noise_5")
        np.testing.assert_array_equal(out.X[:, :2], ds.X)

    def test_augment_noise_uncorrelated_with_response(self):
        rng = np.random.default_rng(7)
        n = 10000
        ds = from_arrays(rng.standard_normal((n, 1)), rng.standard_normal(n))
        out = augment_noise(ds, 3, seed=3)
        for j in range(1, 4):
            corr = np.corrcoef(out.X[:, j], out.y)[0, 1]
            assert abs(corr) <= 0.05


class TestDrawSubsample:
    def test_full_subsample_is_identity_set(self):
        idx = draw_subsample(8, 8, with_replacement=False, seed=1)
        np.testing.assert_array_equal(idx, np.arange(8))

    def test_required_present(self):
        for seed in range(20):
            idx = draw_subsample(30, 5, with_replacement=False, required=7, seed=seed)
            assert 7 in idx
            assert len(set(idx.tolist())) == 5
        idx = draw_subsample(30, 5, with_replacement=True, required=7, seed=0)
        assert 7 in idx

    def test_k_too_large(self):
        with pytest.raises(SubsampleSizeError):
            draw_subsample(5, 6, with_replacement=False, seed=0)
        # with replacement k may exceed n
        idx = draw_subsample(5, 9, with_replacement=True, seed=0)
        assert idx.shape == (9,)

    def test_bootstrap_distinct_fraction(self):
        # distinct fraction of an n-out-of-n with-replacement draw tends to
        # 1 - 1/e; checked against the analytic limit via Monte Carlo
        n = 400
        fracs = [
            len(set(draw_subsample(n, n, with_replacement=True, seed=s).tolist())) / n
            for s in range(60)
        ]
        assert abs(np.mean(fracs) - (1.0 - np.exp(-1.0))) < 0.01

    def test_anchored_draw_uniform_over_rest(self):
        # conditional on containing the anchor, other rows appear equally often
        counts = np.zeros(10)
        for s in range(3000):
            idx = draw_subsample(10, 3, with_replacement=False, required=0, seed=s)
            for i in idx:
                counts[i] += 1
        assert counts[0] == 3000
        rest = counts[1:] / 3000
        np.testing.assert_allclose(rest, 2.0 / 9.0, atol=0.03)


class TestDatasetInvariants:
    def test_immutable_arrays(self):
        ds = from_arrays(np.ones((3, 2)), np.zeros(3))
        with pytest.raises(ValueError):
            ds.X[0, 0] = 5.0
        with pytest.raises(ValueError):
            ds.y[0] = 5.0

    def test_duplicate_names_rejected(self):
        with pytest.raises(DuplicateNameError):
            from_arrays(np.ones((3, 2)), np.zeros(3), names=("a", "a"))

    def test_nonfinite_rejected(self):
        X = np.ones((3, 1))
        X[1, 0] = np.inf
        with pytest.raises(ValueError):
            from_arrays(X, np.zeros(3))

    def test_schema_roundtrip_via_json(self, tmp_path):
        schema = {"x1": "numeric", "c": "categorical", "y": "response"}
        schema_path = tmp_path / "schema.json"
        schema_path.write_text(json.dumps(schema), encoding="utf-8")
        csv_path = write_csv(tmp_path, "x1,c,y\n1.5,red,0\n2.5,blue,1\n3.5,red,0\n")
        ds = load_csv(csv_path, json.loads(schema_path.read_text(encoding="utf-8")))
        assert ds.kinds == ("numeric", "categorical")
        assert ds.levels[1] == ("red", "blue")
