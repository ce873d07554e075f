import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dadebug.errors import ModelFormatError, SchemaMismatchError
from dadebug.features import Dataset
from dadebug.forest import (
    FORMAT_VERSION,
    FeaturesPerSplit,
    ForestModel,
    Hyperparams,
    Tree,
    bootstrap_indices,
    default_grid,
    gini,
    grid_search,
    load_model,
    predict,
    save_model,
    train_forest,
    train_tree,
)
from dadebug.transcript import Appropriateness

ALL = FeaturesPerSplit.ALL
SINGLE = Hyperparams(n_trees=1, features_per_split=ALL, bootstrap=False)


def _toy(n=200, seed=0):
    """Three well separated classes in 2-d plus two noise columns."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 3
    centres = np.array([[0, 0], [10, 0], [0, 10]])
    X = np.hstack([centres[y] + rng.normal(0, 1, (n, 2)), rng.normal(0, 1, (n, 2))])
    return X, y


def _gain(tree, node):
    l, r = tree.left[node], tree.right[node]
    n, nl, nr = (tree.counts[i].sum() for i in (node, l, r))
    return gini(tree.counts[node]) - nl / n * gini(tree.counts[l]) - nr / n * gini(tree.counts[r])


@pytest.mark.parametrize("counts, expected", [([4, 0, 0], 0.0), ([2, 2], 0.5), ([3, 1], 0.375), ([1, 1, 1], 2 / 3)])
def test_gini_examples(counts, expected):
    assert gini(counts) == pytest.approx(expected, abs=1e-12)


def test_gini_rejects_empty():
    with pytest.raises(ValueError):
        gini([0, 0, 0])


def test_pure_node_is_a_leaf():
    tree = train_tree(np.arange(6.0)[:, None], np.zeros(6, dtype=int), SINGLE)
    assert tree.n_nodes == 1 and tree.counts[0].tolist() == [6, 0, 0]


def test_single_feature_split_at_midpoint():
    tree = train_tree(np.array([[0.0], [0.0], [1.0], [1.0]]), np.array([0, 0, 2, 2]), SINGLE)
    assert tree.feature[0] == 0 and tree.threshold[0] == 0.5
    assert tree.predict(np.array([[0.2], [0.9]])).tolist() == [0, 2]


def test_max_depth_one_gives_a_stump():
    X, y = _toy()
    tree = train_tree(X, y, Hyperparams(n_trees=1, max_depth=1, features_per_split=ALL, bootstrap=False))
    assert int(np.sum(tree.feature >= 0)) == 1 and tree.depth() == 1


def _exhaustive_best_split(X, y):
    """Best (feature, threshold) by exact Gini gain; ties to lower feature then lower threshold."""
    n = len(y)
    parent = [Fraction(int(np.sum(y == c)), n) for c in range(3)]
    parent_gini = 1 - sum(p * p for p in parent)
    best = None
    for f in range(X.shape[1]):
        values = sorted(set(X[:, f].tolist()))
        for a, b in zip(values, values[1:]):
            thr = (a + b) / 2
            mask = X[:, f] <= thr
            child = Fraction(0)
            for side in (y[mask], y[~mask]):
                m = len(side)
                g = 1 - sum(Fraction(int(np.sum(side == c)), m) ** 2 for c in range(3))
                child += Fraction(m, n) * g
            key = (parent_gini - child, -f, -thr)
            if best is None or key > best[0]:
                best = (key, f, thr)
    return best[1], best[2]


@pytest.mark.parametrize("seed", range(25))
def test_root_split_matches_exhaustive_search(seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, (10, 5)).astype(float)
    y = rng.integers(0, 3, 10)
    if len(set(y.tolist())) == 1 or all(len(set(col)) == 1 for col in X.T.tolist()):
        pytest.skip("degenerate draw")
    tree = train_tree(X, y, SINGLE)
    assert (int(tree.feature[0]), float(tree.threshold[0])) == _exhaustive_best_split(X, y)


def test_root_split_matches_exhaustive_search_on_real_values():
    rng = np.random.default_rng(99)
    X = rng.normal(size=(10, 3))
    y = rng.integers(0, 3, 10)
    tree = train_tree(X, y, SINGLE)
    assert (int(tree.feature[0]), float(tree.threshold[0])) == _exhaustive_best_split(X, y)


def test_fully_grown_tree_fits_separable_data():
    X, y = _toy()
    tree = train_tree(X, y, Hyperparams(n_trees=1, bootstrap=False))
    assert np.mean(tree.predict(X) == y) == 1.0


def test_forest_fits_separable_data():
    X, y = _toy()
    model = train_forest(X, y, Hyperparams(n_trees=25, seed=1))
    assert np.mean(model.predict_indices(X) == y) == 1.0


def test_every_split_has_nonnegative_gain():
    rng = np.random.default_rng(5)
    X = rng.integers(0, 3, (300, 8)).astype(float)
    y = rng.integers(0, 3, 300)
    model = train_forest(X, y, Hyperparams(n_trees=10, seed=2))
    for tree in model.trees:
        for node in np.flatnonzero(tree.feature >= 0):
            assert _gain(tree, node) >= -1e-12


def test_min_samples_leaf_respected():
    X, y = _toy()
    tree = train_tree(X, y, Hyperparams(n_trees=1, min_samples_leaf=7, bootstrap=False))
    leaves = tree.feature < 0
    assert tree.counts[leaves].sum(axis=1).min() >= 7


def test_training_accuracy_monotone_in_depth():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(150, 4))
    y = rng.integers(0, 3, 150)
    accuracies = []
    for depth in range(1, 12):
        tree = train_tree(X, y, Hyperparams(n_trees=1, max_depth=depth, features_per_split=ALL, bootstrap=False))
        accuracies.append(np.mean(tree.predict(X) == y))
    assert accuracies == sorted(accuracies)


def test_identical_across_thread_counts(tmp_path):
    X, y = _toy(120)
    hp = Hyperparams(n_trees=12, seed=4)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_model(train_forest(X, y, hp, threads=1), a)
    save_model(train_forest(X, y, hp, threads=4), b)
    assert a.read_bytes() == b.read_bytes()


def test_smaller_forest_is_prefix_of_larger():
    X, y = _toy(90)
    small = train_forest(X, y, Hyperparams(n_trees=3, seed=8))
    large = train_forest(X, y, Hyperparams(n_trees=7, seed=8))
    assert [t.to_dict() for t in small.trees] == [t.to_dict() for t in large.trees[:3]]


def test_seed_changes_forest():
    X, y = _toy(90)
    a = train_forest(X, y, Hyperparams(n_trees=3, seed=1))
    b = train_forest(X, y, Hyperparams(n_trees=3, seed=2))
    assert [t.to_dict() for t in a.trees] != [t.to_dict() for t in b.trees]


@pytest.mark.parametrize("field", ["n_trees", "max_depth", "min_samples_leaf", "min_samples_split"])
def test_hyperparams_reject_nonpositive(field):
    with pytest.raises(ValueError, match=field):
        Hyperparams(**{field: 0})


def test_training_rejects_bad_input():
    with pytest.raises(ValueError):
        train_forest(np.zeros((0, 3)), np.zeros(0, dtype=int), Hyperparams(n_trees=1))
    with pytest.raises(ValueError):
        train_forest(np.zeros((2, 3)), np.array([0, -1]), Hyperparams(n_trees=1))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 500), st.integers(0, 2**63), st.integers(0, 1000))
def test_bootstrap_indices_stay_in_training_set(n, seed, ordinal):
    idx = bootstrap_indices(n, seed, ordinal)
    assert len(idx) == n and idx.min() >= 0 and idx.max() < n


def _leaf(counts):
    return Tree.from_dict({"counts": counts})


def test_vote_tie_goes_to_inappropriate():
    model = ForestModel([_leaf([0, 0, 3]), _leaf([2, 0, 0])], SINGLE, {}, "fp")
    label, votes = predict(model, np.zeros(4))
    assert label is Appropriateness.INAPPROPRIATE
    assert votes == {Appropriateness.INAPPROPRIATE: 1, Appropriateness.NEUTRAL: 0, Appropriateness.APPROPRIATE: 1}


def test_leaf_count_tie_goes_to_lower_class():
    assert _leaf([0, 2, 2]).predict(np.zeros((1, 1))).tolist() == [1]


def test_single_tree_forest_predicts_leaf_majority():
    X, y = _toy(60)
    model = train_forest(X, y, Hyperparams(n_trees=1, max_depth=2, seed=3))
    tree = model.trees[0]
    majority = np.argmax(tree.counts[tree.apply(X)], axis=1)
    assert model.predict_indices(X).tolist() == majority.tolist()


def test_votes_sum_to_tree_count():
    X, y = _toy(60)
    model = train_forest(X, y, Hyperparams(n_trees=9, seed=3))
    assert (model.votes(X).sum(axis=1) == 9).all()


def test_save_load_round_trip(tmp_path):
    X, y = _toy(80)
    model = train_forest(X, y, Hyperparams(n_trees=5, seed=6), {"tokens": ["a"]}, "abc")
    path = tmp_path / "m.json"
    size = save_model(model, path)
    assert size == path.stat().st_size
    loaded = load_model(path)
    assert loaded.to_dict() == model.to_dict()
    assert (loaded.votes(X) == model.votes(X)).all()
    assert loaded.n_nodes == model.n_nodes and loaded.n_parameters == model.n_parameters


def test_load_rejects_other_format_version(tmp_path):
    model = ForestModel([_leaf([1, 0, 0])], SINGLE, {}, "fp")
    data = model.to_dict()
    data["format_version"] = FORMAT_VERSION + 1
    path = tmp_path / "m.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ModelFormatError, match="format_version"):
        load_model(path)


@pytest.mark.parametrize("text", ["{oops", "[]", '{"format_version": 1}'])
def test_load_rejects_malformed(tmp_path, text):
    path = tmp_path / "m.json"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_fingerprint_mismatch_raises():
    model = ForestModel([_leaf([1, 0, 0])], SINGLE, {}, "fp-a")
    with pytest.raises(SchemaMismatchError):
        model.votes(np.zeros((1, 2)), "fp-b")
    assert model.votes(np.zeros((1, 2)), "fp-a").tolist() == [[1, 0, 0]]


def test_storage_accounting():
    tree = Tree.from_dict({"feature": 0, "threshold": 0.5, "left": {"counts": [1, 0, 0]}, "right": {"counts": [0, 2, 0]}})
    model = ForestModel([tree, tree], SINGLE, {}, "")
    assert model.n_nodes == 6
    # per tree: one split node (feature, threshold) and two leaves of three counts
    assert model.n_parameters == 2 * (2 + 6)
    assert model.max_depth() == 1
    assert tree.counts[0].tolist() == [1, 2, 0]


def _dataset(X, y):
    return Dataset(X, np.asarray(y), list(range(len(y))), "fp")


def test_default_grid_shape():
    grid = default_grid(seed=5)
    assert len(grid) == 36 and len(set(grid)) == 36
    assert all(hp.seed == 5 for hp in grid)


def test_grid_search_prefers_cheaper_config_on_ties():
    X, y = _toy(150)
    train, dev = _dataset(X[:100], y[:100]), _dataset(X[100:], y[100:])
    grid = [Hyperparams(n_trees=n, max_depth=d, seed=0) for n, d in itertools.product((20, 5), (30, 10))]
    best, report = grid_search(train, dev, grid)
    assert all(r["weighted_f1"] == 1.0 for r in report)
    assert (best.n_trees, best.max_depth) == (5, 10)
    assert [r["hyperparams"] for r in report] == [hp.to_dict() for hp in grid]


def test_grid_search_scores_match_direct_training():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(120, 5))
    y = rng.integers(0, 3, 120)
    train, dev = _dataset(X[:80], y[:80]), _dataset(X[80:], y[80:])
    grid = [Hyperparams(n_trees=n, max_depth=4, seed=1) for n in (3, 8)]
    _, report = grid_search(train, dev, grid)
    for hp, entry in zip(grid, report):
        pred = train_forest(train.X, train.y, hp).predict_indices(dev.X)
        assert entry["accuracy"] == pytest.approx(np.mean(pred == dev.y), abs=1e-12)


def test_grid_search_rejects_empty_grid():
    X, y = _toy(30)
    with pytest.raises(ValueError):
        grid_search(_dataset(X, y), _dataset(X, y), [])
