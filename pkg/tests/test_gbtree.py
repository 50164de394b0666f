import numpy as np
import pytest

from adaptnas import gbtree
from adaptnas.gbtree import GbtConfig, GbtModel, eval_quality, feature_importance, fit, quality


def step_data(n=100, seed=0, extra=0):
    rng = np.random.default_rng(seed)
    x0 = rng.integers(0, 10, size=n)
    X = np.column_stack([x0, *[rng.integers(0, 10, size=n) for _ in range(extra)]]).astype(float)
    y = (x0 >= 3).astype(float)
    return X, y


def best_stump_oracle(x, y, lam):
    """Exhaustive gain scan over every midpoint, written independently of the tree builder."""
    r = y - y.mean()
    G, n = r.sum(), len(r)
    best = (-np.inf, None)
    vals = np.unique(x)
    for a, b in zip(vals[:-1], vals[1:]):
        t = (a + b) / 2
        L = x < t
        gl, nl = r[L].sum(), L.sum()
        gr, nr = G - gl, n - nl
        gain = 0.5 * (gl**2 / (nl + lam) + gr**2 / (nr + lam) - G**2 / (n + lam))
        if gain > best[0]:
            best = (gain, t)
    return best


class TestFit:
    def test_constant_targets(self):
        X = np.random.default_rng(0).random((20, 3))
        model = fit(X, np.full(20, 0.7))
        assert model.trees == []
        assert np.allclose(model.predict(X), 0.7)
        assert model.predict(X[0]) == pytest.approx(0.7)

    def test_step_function_stump(self):
        X, y = step_data()
        model = fit(X, y, GbtConfig(n_trees=1, max_depth=1, reg_lambda=0.0, learning_rate=1.0))
        tree = model.trees[0]
        assert tree.feature[0] == 0
        assert 2 < tree.threshold[0] <= 3
        gain, t = best_stump_oracle(X[:, 0], y, 0.0)
        assert tree.threshold[0] == t
        leaves = sorted(model.predict(np.array([[0.0], [9.0]])))
        assert leaves == pytest.approx([0.0, 1.0], abs=1e-12)
        assert model.predict(np.array([5.0])) == pytest.approx(1.0, abs=0.05)

    def test_large_lambda_shrinks_to_base(self):
        X, y = step_data()
        model = fit(X, y, GbtConfig(n_trees=5, reg_lambda=1e12))
        assert np.allclose(model.predict(X), y.mean(), atol=1e-6)

    def test_overfit_reproduces_training_rows(self):
        rng = np.random.default_rng(1)
        grid = np.indices((5, 5, 5, 5)).reshape(4, -1).T
        X = grid[rng.choice(len(grid), size=60, replace=False)].astype(float)
        y = rng.random(60)
        model = fit(X, y, GbtConfig(n_trees=50, max_depth=6, reg_lambda=0.0, learning_rate=1.0,
                                    min_samples_leaf=1))
        assert np.all(np.abs(model.predict(X) - y) < 0.01)

    def test_gamma_blocks_weak_splits(self):
        X, y = step_data()
        gain, _ = best_stump_oracle(X[:, 0], y, 1.0)
        model = fit(X, y, GbtConfig(n_trees=1, max_depth=1, gamma=gain + 1e-9, learning_rate=1.0))
        assert model.trees[0].feature[0] == -1

    def test_depth_is_capped(self):
        rng = np.random.default_rng(2)
        X = rng.integers(0, 8, size=(300, 5)).astype(float)
        model = fit(X, rng.random(300), GbtConfig(n_trees=10, max_depth=3))
        assert max(t.depth for t in model.trees) <= 3

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            fit(np.zeros((1, 2)), np.zeros(1))
        with pytest.raises(ValueError):
            fit(np.array([[0.0], [np.nan]]), np.zeros(2))
        with pytest.raises(ValueError):
            GbtConfig(learning_rate=0.0)

    def test_feature_count_checked_at_predict(self):
        X, y = step_data()
        with pytest.raises(ValueError):
            fit(X, y).predict(np.zeros((1, 3)))

    def test_deterministic_and_serializable(self, tmp_path):
        X, y = step_data(extra=3)
        a, b = fit(X, y), fit(X, y)
        assert a.dumps() == b.dumps()
        a.save(tmp_path / "m.json")
        back = GbtModel.load(tmp_path / "m.json")
        assert np.array_equal(back.predict(X), a.predict(X))
        assert back.dumps() == a.dumps()


class TestPredict:
    def test_empty_model_is_base_score(self):
        model = GbtModel(base_score=0.3, n_features=2)
        assert gbtree.predict(model, np.array([1.0, 2.0])) == 0.3

    def test_sum_of_trees(self):
        X, y = step_data(extra=2)
        model = fit(X, y, GbtConfig(n_trees=7))
        manual = model.base_score + sum(model.learning_rate * t.predict(X) for t in model.trees)
        assert np.allclose(model.predict(X), manual)


class TestImportance:
    def test_zero_tree_model(self):
        assert feature_importance(GbtModel(0.0, 4)).tolist() == [0, 0, 0, 0]

    def test_single_relevant_feature(self):
        X, y = step_data(extra=2)
        model = fit(X, y, GbtConfig(n_trees=1, max_depth=1))
        assert feature_importance(model).tolist() == [1.0, 0.0, 0.0]

    def test_split_counts_match_trees(self):
        X, y = step_data(extra=3)
        model = fit(X, y + 0.1 * X[:, 2])
        counted = np.zeros(4)
        for t in model.trees:
            for f in t.feature[t.feature >= 0]:
                counted[f] += 1
        assert np.array_equal(counted, model.split_counts)

    def test_linear_ordering_over_seeds(self):
        # A split penalty keeps noise splits from inflating irrelevant counts.
        ok = 0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            X = rng.integers(0, 8, size=(400, 5)).astype(float)
            y = 3 * X[:, 0] + X[:, 1] + rng.normal(0, 1, 400)
            imp = feature_importance(fit(X, y, GbtConfig(gamma=1.0)))
            ok += imp[0] > imp[1] > imp[2:].max()
        assert ok >= 9

    def test_gain_importance(self):
        X, y = step_data(extra=2)
        imp = feature_importance(fit(X, y), kind="gain")
        assert imp.sum() == pytest.approx(1.0)
        assert imp.argmax() == 0


class TestQuality:
    def test_perfect(self):
        q = quality([1, 2, 3, 4], [1, 2, 3, 4])
        assert q.r2 == 1.0 and q.kendall_tau == 1.0

    def test_reversed(self):
        assert quality([4, 3, 2, 1], [1, 2, 3, 4]).kendall_tau == pytest.approx(-1.0)

    def test_constant_target_flags_r2(self):
        q = quality([1, 2, 3], [5, 5, 5])
        assert not q.r2_defined

    def test_holdout_minimum(self):
        X, y = step_data()
        with pytest.raises(ValueError):
            eval_quality(fit(X, y), X[:4], y[:4])

    def test_smooth_function_holdout(self):
        rng = np.random.default_rng(0)
        X = rng.integers(0, 7, size=(500, 6)).astype(float)
        y = np.sin(X[:, 0] / 2) + 0.5 * X[:, 1] + 0.3 * X[:, 2] * X[:, 3] / 6 + 0.05 * rng.normal(size=500)
        model = fit(X[:400], y[:400])
        q = eval_quality(model, X[400:], y[400:])
        assert q.kendall_tau >= 0.8
