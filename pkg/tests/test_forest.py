from fractions import Fraction

import numpy as np
import pytest

from featpress.errors import DataError, SchemaError
from featpress.forest import (
    ForestModel,
    ForestParams,
    Tree,
    bootstrap_sample,
    f1_score,
    feature_importance,
    macro_f1,
    predict,
    train_forest,
    weighted_f1,
)
from featpress.quantizer import fit_ranges, quantize_table
from featpress.tabular import SynthSpec, synth_generate

from conftest import make_table


def separable():
    x = np.r_[np.linspace(0, 4.9, 50), np.linspace(5.1, 10, 50)]
    return make_table(x, [0] * 50 + [1] * 50)


def test_separable_stumps():
    t = separable()
    m = train_forest(t, ForestParams(n_trees=20, seed=1))
    for tree in m.trees:
        assert tree.n_nodes == 3
        assert abs(tree.threshold[0] - 5.0) < 0.5
    assert np.array_equal(predict(m, t), t.labels)


def test_determinism_and_thread_independence():
    t = synth_generate(SynthSpec(n_classes=3, n_informative=4, n_noise=2, rows_per_class=60, separation=1.0, seed=2))
    p = ForestParams(n_trees=15, seed=11)
    a = train_forest(t, p)
    assert a.fingerprint() == train_forest(t, p).fingerprint()
    assert a.fingerprint() == train_forest(t, p, n_jobs=4).fingerprint()
    assert a.fingerprint() != train_forest(t, ForestParams(n_trees=15, seed=12)).fingerprint()


def test_tree_invariants():
    t = synth_generate(SynthSpec(n_classes=3, n_informative=3, n_noise=2, rows_per_class=50, separation=1.0, seed=4))
    m = train_forest(t, ForestParams(n_trees=5, seed=3))
    for tree in m.trees:
        internal = np.flatnonzero(tree.feature >= 0)
        for i in internal:
            l, r = tree.left[i], tree.right[i]
            assert tree.counts[l].sum() > 0 and tree.counts[r].sum() > 0
            assert np.array_equal(tree.counts[l] + tree.counts[r], tree.counts[i])
        assert tree.counts[0].sum() == t.n_rows


def test_max_depth_and_min_samples_split():
    t = synth_generate(SynthSpec(n_classes=3, n_informative=3, n_noise=2, rows_per_class=50, separation=0.5, seed=4))
    stump = train_forest(t, ForestParams(n_trees=3, max_depth=1, seed=0))
    assert all(tree.n_nodes <= 3 for tree in stump.trees)
    big = train_forest(t, ForestParams(n_trees=3, min_samples_split=100, seed=0))
    for tree in big.trees:
        for i in np.flatnonzero(tree.feature >= 0):
            assert tree.counts[i].sum() >= 100


# ---- exhaustive-split oracle -------------------------------------------------


def _gini_weighted(groups):
    total = 0
    for labels in groups:
        n = len(labels)
        counts = {}
        for y in labels:
            counts[y] = counts.get(y, 0) + 1
        total += Fraction(n) - sum(Fraction(c * c, n) for c in counts.values())
    return total


def _oracle_tree(x, y, rows):
    """Try every feature and every midpoint; lowest weighted Gini, ties to lower feature then threshold."""
    labels = [y[r] for r in rows]
    counts = tuple(int(np.sum(np.array(labels) == c)) for c in range(3))
    if len(set(labels)) == 1 or len(rows) < 2:
        return ("leaf", counts)
    best = None
    for f in range(x.shape[1]):
        vals = sorted(set(x[r, f] for r in rows))
        for a, b in zip(vals, vals[1:]):
            thr = (a + b) / 2.0
            if thr >= b:
                thr = a
            left = [r for r in rows if x[r, f] <= thr]
            right = [r for r in rows if x[r, f] > thr]
            score = _gini_weighted([[y[r] for r in left], [y[r] for r in right]])
            if best is None or score < best[0]:
                best = (score, f, thr, left, right)
    if best is None:
        return ("leaf", counts)
    _, f, thr, left, right = best
    return ("split", f, thr, _oracle_tree(x, y, left), _oracle_tree(x, y, right))


def _as_nested(tree: Tree, node=0):
    if tree.feature[node] < 0:
        return ("leaf", tuple(int(c) for c in tree.counts[node]))
    return (
        "split",
        int(tree.feature[node]),
        float(tree.threshold[node]),
        _as_nested(tree, tree.left[node]),
        _as_nested(tree, tree.right[node]),
    )


@pytest.mark.parametrize("seed", [0, 5, 17])
def test_single_tree_matches_exhaustive_oracle(reference_split, seed):
    train, _ = reference_split
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(train.n_rows, 20, replace=False))
    # keep 3 classes so the slice is a genuine multiclass problem
    sl = train.take(rows)
    keep = np.isin(sl.labels, np.unique(sl.labels)[:3])
    sl = sl.take(np.flatnonzero(keep))
    remap = {c: i for i, c in enumerate(np.unique(sl.labels))}
    sl = make_table(sl.values, [remap[c] for c in sl.labels], names=list(sl.feature_names), classes=["a", "b", "c"][: len(remap)])
    params = ForestParams(n_trees=1, max_features=sl.n_features, seed=seed)
    tree = train_forest(sl, params).trees[0]
    boot = bootstrap_sample(seed, 0, sl.n_rows)
    expected = _oracle_tree(sl.values, sl.labels.tolist(), list(boot))
    assert _as_nested(tree) == _pad_counts(expected, sl.n_classes)


def _pad_counts(node, k):
    if node[0] == "leaf":
        return ("leaf", node[1][:k])
    return (node[0], node[1], node[2], _pad_counts(node[3], k), _pad_counts(node[4], k))


# ---- prediction -------------------------------------------------------------


def _stump(feature, thr, left_counts, right_counts):
    return Tree(
        np.array([feature, -1, -1]),
        np.array([thr, 0.0, 0.0]),
        np.array([1, -1, -1]),
        np.array([2, -1, -1]),
        np.array([np.add(left_counts, right_counts), left_counts, right_counts]),
        np.zeros(1),
    )


def _model(trees, k=3):
    return ForestModel(tuple(trees), tuple("abc"[:k]), ("x0",), ForestParams(n_trees=len(trees)))


def test_vote_tie_goes_to_lowest_class_id():
    # two stumps that disagree on every row: one votes class 2, the other class 1
    m = _model([_stump(0, 0.0, [0, 0, 5], [0, 0, 5]), _stump(0, 0.0, [0, 5, 0], [0, 5, 0])])
    assert predict(m, np.array([[-1.0], [1.0]])).tolist() == [1, 1]
    m = _model([_stump(0, 0.0, [0, 0, 5], [0, 0, 5]), _stump(0, 0.0, [5, 0, 0], [5, 0, 0])])
    assert predict(m, np.array([[3.0]])).tolist() == [0]


def test_leaf_majority_tie_goes_to_lowest_class_id():
    m = _model([_stump(0, 0.0, [0, 2, 2], [3, 0, 3])])
    assert predict(m, np.array([[-1.0], [1.0]])).tolist() == [1, 0]


def test_single_tree_forest_equals_tree():
    t = synth_generate(SynthSpec(n_classes=3, n_informative=2, n_noise=2, rows_per_class=40, separation=0.7, seed=9))
    m = train_forest(t, ForestParams(n_trees=1, seed=2))
    assert np.array_equal(predict(m, t), m.trees[0].predict(t.values))


def test_training_rows_recover_labels():
    t = separable()
    m = train_forest(t, ForestParams(n_trees=10, seed=3))
    assert macro_f1(predict(m, t), t.labels) == 1.0


def test_width_mismatch():
    m = train_forest(separable(), ForestParams(n_trees=2))
    with pytest.raises(SchemaError):
        predict(m, np.zeros((2, 3)))


def test_training_errors():
    with pytest.raises(DataError, match="single class"):
        train_forest(make_table([[1.0], [2.0]], [0, 0]), ForestParams())
    with pytest.raises(DataError):
        train_forest(make_table(np.zeros((0, 1)), [], classes=["a"]), ForestParams())
    with pytest.raises(DataError):
        train_forest(separable(), ForestParams(max_features=2))
    with pytest.raises(DataError):
        ForestParams(min_samples_split=1)


# ---- robustness properties ---------------------------------------------------


@pytest.fixture(scope="module")
def noisy():
    t = synth_generate(SynthSpec(n_classes=3, n_informative=4, n_noise=2, rows_per_class=80, separation=1.0, heavy_tail_fraction=0, seed=21))
    from featpress.tabular import stratified_split

    return stratified_split(t, 0.3, 1)


def test_affine_increasing_transform_keeps_predictions(noisy):
    train, test = noisy
    p = ForestParams(n_trees=20, seed=5)
    a = train_forest(train, p)
    f = lambda v: 3.0 * v + 7.0  # noqa: E731
    b = train_forest(train.with_features(train.feature_names, f(train.values)), p)
    for ta, tb in zip(a.trees, b.trees):
        assert np.array_equal(ta.feature, tb.feature) and np.array_equal(ta.counts, tb.counts)
    assert np.array_equal(predict(a, test), predict(b, f(test.values)))


def test_nonlinear_increasing_transform_keeps_tree_structure(noisy):
    train, _ = noisy
    p = ForestParams(n_trees=20, seed=5)
    a = train_forest(train, p)
    g = lambda v: np.cbrt(v) + v  # noqa: E731
    tv = train.with_features(train.feature_names, g(train.values))
    b = train_forest(tv, p)
    for ta, tb in zip(a.trees, b.trees):
        assert np.array_equal(ta.feature, tb.feature) and np.array_equal(ta.counts, tb.counts)
    assert np.array_equal(predict(a, train), predict(b, tv))


def test_32_bit_quantization_keeps_f1(reference_split):
    train, test = reference_split
    p = ForestParams(seed=7)
    base = macro_f1(predict(train_forest(train, p), test), test.labels)
    r = fit_ranges(train)
    q = macro_f1(predict(train_forest(quantize_table(train, r, 32), p), quantize_table(test, r, 32)), test.labels)
    assert abs(q - base) <= 0.01


# ---- importance ---------------------------------------------------------------


def test_single_informative_feature_gets_the_importance():
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1], 100)
    x = np.c_[y * 10.0 + rng.normal(size=200) * 0.1, rng.normal(size=(200, 3))]
    t = make_table(x, y)
    # every candidate visible at the root: the informative split is always taken and is pure
    full = feature_importance(train_forest(t, ForestParams(n_trees=30, max_features=4, seed=1)))
    assert full[0] == pytest.approx(1.0, abs=1e-12)
    # sqrt sampling hides it from some roots, which then spend a split on noise first
    imp = feature_importance(train_forest(t, ForestParams(n_trees=30, seed=1)))
    assert imp[0] > 0.9
    assert imp.sum() == pytest.approx(1.0, abs=1e-9)


def test_importance_sums_to_one(reference_split):
    m = train_forest(reference_split[0], ForestParams(n_trees=20, seed=3))
    imp = feature_importance(m)
    assert abs(imp.sum() - 1.0) <= 1e-9 and np.all(imp >= 0)


def test_duplicated_column_splits_importance():
    rng = np.random.default_rng(8)
    y = np.repeat([0, 1, 2], 150)
    signal = y * 1.5 + rng.normal(size=y.size)
    noise = rng.normal(size=(y.size, 4))
    p = ForestParams(n_trees=100, seed=4)
    single = feature_importance(train_forest(make_table(np.c_[signal, noise], y), p))
    dup = feature_importance(train_forest(make_table(np.c_[signal, signal, noise], y), p))
    assert dup[0] > 0.1 and dup[1] > 0.1
    assert dup[0] + dup[1] == pytest.approx(single[0], abs=0.1)


# ---- F1 ---------------------------------------------------------------------


def test_f1_hand_example():
    truth = ["A", "A", "B", "B", "C"]
    pred = ["A", "B", "B", "B", "C"]
    assert macro_f1(pred, truth) == pytest.approx((2 / 3 + 0.8 + 1) / 3)
    assert round(macro_f1(pred, truth), 4) == 0.8222


def test_f1_perfect_and_disjoint():
    assert macro_f1([0, 1, 2], [0, 1, 2]) == 1.0
    assert macro_f1([3, 3, 4], [0, 1, 2]) == 0.0


def test_weighted_f1():
    # per-class F1: class0 = 6/7, class1 = 0; support 3 and 1
    assert weighted_f1([0, 0, 0, 0], [0, 0, 0, 1]) == pytest.approx((3 * 6 / 7) / 4)
    assert f1_score([0, 0, 0, 0], [0, 0, 0, 1], "macro") == pytest.approx(3 / 7)
    with pytest.raises(DataError):
        f1_score([0], [0], "micro")


def test_f1_errors():
    with pytest.raises(DataError):
        macro_f1([0, 1], [0])
    with pytest.raises(DataError):
        macro_f1([], [])


def test_dump_is_json():
    import json

    m = train_forest(separable(), ForestParams(n_trees=2))
    d = json.loads(m.dump())
    assert len(d["trees"]) == 2 and d["trees"][0][0]["feature"] == "x0"
