import numpy as np
import pytest

from _oracles import best_split_oracle, fit_tree_oracle, random_small_dataset, tree_nodes_equal
from rfinfer.data import CATEGORICAL, Dataset, from_arrays
from rfinfer.errors import ArityMismatchError, EmptyRowsError, NoAdmissibleSplitError
from rfinfer.tree import (
    TreeParams,
    best_split,
    fit_tree,
    leaf_partition,
    predict_rows,
    predict_tree,
    split_gains,
    tree_from_dict,
    tree_to_dict,
)


def full_cart(min_leaf=1, **kw):
    kw.setdefault("mtry", None)
    return TreeParams(min_leaf=min_leaf, random_split_prob=0.0, **kw)


class TestBestSplit:
    def test_two_point_textbook_case(self):
        # SSE of y = {0, 1} is 0.5; splitting at the midpoint removes it all
        s = best_split(np.array([-1.0, 1.0]), np.array([0.0, 1.0]), min_leaf=1)
        assert s.threshold == 0.0
        assert s.gain == pytest.approx(0.5, abs=1e-12)

    def test_constant_response_returns_smallest_threshold(self):
        s = best_split(np.array([1.0, 2.0, 3.0]), np.zeros(3), min_leaf=1)
        assert s.threshold == 1.5
        assert s.gain == pytest.approx(0.0, abs=1e-12)

    def test_no_admissible_split(self):
        with pytest.raises(NoAdmissibleSplitError):
            best_split(np.ones(4), np.arange(4.0), min_leaf=1)
        with pytest.raises(NoAdmissibleSplitError):
            best_split(np.array([1.0, 2.0]), np.array([0.0, 1.0]), min_leaf=2)

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            ds = random_small_dataset(rng, with_categorical=False)
            rows = np.arange(ds.n)
            want = best_split_oracle(ds, rows, min_leaf=1)
            if want is None or ds.p != 1:
                continue
            got = best_split(ds.X[:, 0], ds.y, min_leaf=1)
            j, thr, subset, gain, _ = want
            if j == 0:
                assert got.threshold == thr
                assert got.gain == pytest.approx(gain, abs=1e-9)

    def test_categorical_subset(self):
        x = np.array([0.0, 0.0, 1.0, 1.0, 2.0, 2.0])
        y = np.array([0.0, 0.0, 5.0, 5.0, 0.1, -0.1])
        s = best_split(x, y, kind=CATEGORICAL, min_leaf=1)
        # {0,2} vs {1} is the best partition; its complement pair ties in
        # gain and (0, 2) is the lexicographically smaller subset
        assert s.subset == (0, 2)
        assert s.threshold is None

    def test_categorical_tie_prefers_lex_smallest(self):
        # constant response: every subset ties at gain 0
        x = np.array([0.0, 1.0, 2.0])
        s = best_split(x, np.zeros(3), kind=CATEGORICAL, min_leaf=1)
        assert s.subset == (0,)


class TestFitTree:
    def test_constant_response_single_leaf(self):
        ds = from_arrays(np.arange(6.0)[:, None], np.full(6, 3.25))
        tree = fit_tree(ds, np.arange(6), full_cart())
        assert tree.n_nodes == 1
        assert tree.value[0] == 3.25

    def test_step_function_root_split(self):
        X = np.array([[-1.0], [-1.0], [1.0], [1.0]])
        y = (X[:, 0] > 0).astype(float)
        ds = from_arrays(X, y)
        tree = fit_tree(ds, np.arange(4), full_cart(mtry=1))
        assert tree.feature[0] == 0
        assert tree.threshold[0] == 0.0
        left_val = tree.value[tree.left[0]]
        right_val = tree.value[tree.right[0]]
        assert {left_val, right_val} == {0.0, 1.0}

    def test_min_leaf_equal_rows_single_leaf(self):
        rng = np.random.default_rng(0)
        ds = from_arrays(rng.standard_normal((8, 2)), rng.standard_normal(8))
        tree = fit_tree(ds, np.arange(8), TreeParams(min_leaf=8, mtry=2))
        assert tree.n_nodes == 1
        assert tree.value[0] == pytest.approx(ds.y.mean())

    def test_empty_rows_rejected(self):
        ds = from_arrays(np.ones((3, 1)), np.zeros(3))
        with pytest.raises(EmptyRowsError):
            fit_tree(ds, [], full_cart())

    def test_zero_feature_dataset_single_leaf(self):
        ds = Dataset(np.empty((5, 0)), np.arange(5.0), (), (), ())
        tree = fit_tree(ds, np.arange(5), full_cart())
        assert tree.n_nodes == 1
        assert tree.value[0] == 2.0

    def test_perfect_fit_with_distinct_values(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((30, 2))
        y = rng.standard_normal(30)
        ds = from_arrays(X, y)
        tree = fit_tree(ds, np.arange(30), full_cart(mtry=2))
        np.testing.assert_allclose(predict_rows(tree, X), y, atol=1e-12)

    def test_training_rows_partition_leaves(self):
        rng = np.random.default_rng(2)
        ds = from_arrays(rng.standard_normal((40, 3)), rng.standard_normal(40))
        rows = np.arange(40)
        tree = fit_tree(ds, rows, TreeParams(min_leaf=3, mtry=3, seed=5))
        leaves = leaf_partition(tree, ds, rows)
        counts = {}
        for leaf in leaves:
            counts[leaf] = counts.get(leaf, 0) + 1
        leaf_ids = np.flatnonzero(tree.feature < 0)
        assert set(counts) == set(leaf_ids.tolist())
        for leaf_id in leaf_ids:
            assert counts[leaf_id] == tree.count[leaf_id]
            assert counts[leaf_id] >= 3


class TestOracleEquivalence:
    @pytest.mark.parametrize("with_categorical", [False, True])
    def test_node_for_node_vs_brute_force(self, with_categorical):
        rng = np.random.default_rng(42 + with_categorical)
        for _ in range(60):
            ds = random_small_dataset(rng, with_categorical)
            rows = np.arange(ds.n)
            tree = fit_tree(ds, rows, TreeParams(min_leaf=1, mtry=ds.p))
            want = fit_tree_oracle(ds, rows, min_leaf=1)
            assert tree_nodes_equal(tree, 0, want)

    def test_min_leaf_variants(self):
        rng = np.random.default_rng(7)
        for min_leaf in (2, 3):
            for _ in range(20):
                ds = random_small_dataset(rng, with_categorical=False)
                rows = np.arange(ds.n)
                tree = fit_tree(ds, rows, TreeParams(min_leaf=min_leaf, mtry=ds.p))
                want = fit_tree_oracle(ds, rows, min_leaf=min_leaf)
                assert tree_nodes_equal(tree, 0, want)


class TestRandomSplits:
    def test_alpha_one_structure_ignores_responses(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((60, 3))
        y = rng.standard_normal(60)
        ds = from_arrays(X, y)
        perm = np.random.default_rng(9).permutation(60)
        ds_perm = from_arrays(X, y[perm])
        params = TreeParams(min_leaf=4, mtry=2, random_split_prob=1.0, seed=11)
        t1 = fit_tree(ds, np.arange(60), params)
        t2 = fit_tree(ds_perm, np.arange(60), params)
        np.testing.assert_array_equal(t1.feature, t2.feature)
        np.testing.assert_array_equal(t1.threshold[t1.feature >= 0], t2.threshold[t2.feature >= 0])
        assert not np.allclose(t1.value[t1.feature < 0], t2.value[t2.feature < 0])

    def test_alpha_zero_recovers_cart(self):
        rng = np.random.default_rng(4)
        ds = from_arrays(rng.standard_normal((30, 2)), rng.standard_normal(30))
        a = fit_tree(ds, np.arange(30), TreeParams(min_leaf=2, mtry=2, seed=1))
        b = fit_tree(
            ds, np.arange(30), TreeParams(min_leaf=2, mtry=2, random_split_prob=0.0, seed=99)
        )
        # alpha=0 consumes no split-choice randomness: same structure for any seed
        np.testing.assert_array_equal(a.feature, b.feature)
        np.testing.assert_array_equal(a.threshold[a.feature >= 0], b.threshold[b.feature >= 0])


class TestHonest:
    def test_leaf_values_come_from_estimation_half(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((80, 2))
        y = rng.standard_normal(80)
        ds = from_arrays(X, y)
        params = TreeParams(min_leaf=4, mtry=2, honest=True, seed=21)
        tree = fit_tree(ds, np.arange(80), params)
        assert tree.structure_half is not None and tree.estimation_half is not None
        assert set(tree.structure_half) | set(tree.estimation_half) == set(range(80))
        # replacing structure-half responses leaves every leaf value alone
        y2 = y.copy()
        y2[tree.structure_half] += 100.0
        # keep the split geometry identical by reusing the same seed; splits
        # move because gains change, so compare via degenerate alpha... the
        # robust check: estimation rows alone reproduce each leaf value
        leaves = leaf_partition(tree, ds, tree.estimation_half)
        for leaf_id in np.unique(leaves):
            members = tree.estimation_half[leaves == leaf_id]
            if members.size:
                assert tree.value[leaf_id] == pytest.approx(ds.y[members].mean())

    def test_empty_estimation_leaf_falls_back_to_ancestor(self):
        # two rows: structure half gets one, estimation half the other;
        # the root leaf must never be NaN
        ds = from_arrays(np.array([[0.0], [1.0]]), np.array([1.0, 3.0]))
        params = TreeParams(min_leaf=1, mtry=1, honest=True, seed=2)
        tree = fit_tree(ds, np.arange(2), params)
        assert np.isfinite(tree.value[tree.feature < 0]).all()


class TestPredict:
    def test_single_leaf_constant(self):
        ds = from_arrays(np.ones((4, 2)), np.full(4, 7.0))
        tree = fit_tree(ds, np.arange(4), full_cart(mtry=2))
        assert predict_tree(tree, [9.9, -3.0]) == 7.0

    def test_at_threshold_goes_right(self):
        X = np.array([[-1.0], [1.0]])
        y = np.array([0.0, 1.0])
        tree = fit_tree(from_arrays(X, y), np.arange(2), full_cart(mtry=1))
        thr = tree.threshold[0]
        assert predict_tree(tree, [thr]) == tree.value[tree.right[0]]
        assert predict_tree(tree, [thr - 1e-9]) == tree.value[tree.left[0]]

    def test_manual_routing_depth_two(self):
        # hand-built 8-row dataset whose full CART tree has depth 2
        X = np.array(
            [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0],
             [2.0, 0.0], [2.0, 1.0], [3.0, 0.0], [3.0, 1.0]]
        )
        y = np.array([0.0, 0.0, 1.0, 1.0, 4.0, 4.0, 5.0, 5.0])
        ds = from_arrays(X, y)
        tree = fit_tree(ds, np.arange(8), TreeParams(min_leaf=2, mtry=2))
        for xi, yi in zip(X, y):
            assert predict_tree(tree, xi) == yi

    def test_arity_mismatch(self):
        ds = from_arrays(np.ones((4, 2)), np.zeros(4))
        tree = fit_tree(ds, np.arange(4), full_cart(mtry=2))
        with pytest.raises(ArityMismatchError):
            predict_tree(tree, [1.0])

    def test_categorical_routing(self):
        X = np.array([[0.0], [1.0], [2.0], [0.0], [1.0], [2.0]])
        y = np.array([0.0, 10.0, 0.0, 0.0, 10.0, 0.0])
        ds = Dataset(X, y, (CATEGORICAL,), (("a", "b", "c"),), ("c1",))
        tree = fit_tree(ds, np.arange(6), full_cart(mtry=1))
        assert predict_tree(tree, [1.0]) == 10.0
        assert predict_tree(tree, [0.0]) == 0.0
        assert predict_tree(tree, [2.0]) == 0.0


class TestSplitGains:
    def test_single_leaf_all_zero(self):
        ds = from_arrays(np.ones((4, 3)), np.full(4, 1.0))
        tree = fit_tree(ds, np.arange(4), full_cart(mtry=3))
        np.testing.assert_array_equal(split_gains(tree), np.zeros(3))

    def test_only_used_feature_nonzero(self):
        X = np.column_stack([np.arange(8.0), np.ones(8)])
        y = (np.arange(8) >= 4).astype(float)
        ds = from_arrays(X, y)
        tree = fit_tree(ds, np.arange(8), TreeParams(min_leaf=4, mtry=2))
        gains = split_gains(tree)
        assert gains[0] > 0
        assert gains[1] == 0.0

    def test_equals_sum_of_node_records(self):
        rng = np.random.default_rng(6)
        ds = from_arrays(rng.standard_normal((50, 3)), rng.standard_normal(50))
        tree = fit_tree(ds, np.arange(50), TreeParams(min_leaf=3, mtry=3))
        gains = split_gains(tree)
        total = sum(
            tree.gain[i] for i in range(tree.n_nodes) if tree.feature[i] >= 0
        )
        assert gains.sum() == pytest.approx(total, rel=1e-12)


class TestSerialization:
    def test_roundtrip_predictions(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((40, 3))
        X[:, 2] = rng.integers(0, 3, size=40)
        ds = Dataset(
            X,
            rng.standard_normal(40),
            ("numeric", "numeric", CATEGORICAL),
            (None, None, ("u", "v", "w")),
            ("a", "b", "c"),
        )
        tree = fit_tree(ds, np.arange(40), TreeParams(min_leaf=2, mtry=3, seed=3))
        clone = tree_from_dict(tree_to_dict(tree))
        pts = ds.X[:10]
        np.testing.assert_array_equal(predict_rows(tree, pts), predict_rows(clone, pts))
        np.testing.assert_array_equal(clone.in_sample, tree.in_sample)
