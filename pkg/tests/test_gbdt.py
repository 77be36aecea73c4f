import numpy as np
import pytest

from vdep import gbdt
from vdep.gbdt import ModelFormatError, TrainConfig, Tree, TreeEnsemble


def brute_force_best_split(X, g, h, lam=1.0, gamma=0.0, min_child_weight=1.0):
    """Direct objective-reduction search: for every candidate, place the
    optimal weight on each side and measure the regularized objective drop.
    Ties resolve to the lowest feature index, then the lowest threshold."""

    def objective(gs, hs):
        w = -gs / (hs + lam)
        return gs * w + 0.5 * (hs + lam) * w * w

    n, n_feat = X.shape
    parent = objective(g.sum(), h.sum())
    best = None
    for f in range(n_feat):
        vals = np.unique(X[:, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = 0.5 * (lo + hi)
            if thr <= lo:
                continue
            left = X[:, f] < thr
            hl, hr = h[left].sum(), h[~left].sum()
            if hl < min_child_weight or hr < min_child_weight:
                continue
            reduction = parent - objective(g[left].sum(), h[left].sum()) - objective(
                g[~left].sum(), h[~left].sum()
            ) - gamma
            if reduction <= 0:
                continue
            if best is None or reduction > best[0] + 1e-12:
                best = (reduction, f, thr)
    return best


def exhaustive_depth2_accuracy(X, y):
    """Best depth-2 classification tree by full enumeration."""

    def best_child_accuracy(mask):
        ys = y[mask]
        if len(ys) == 0:
            return 0
        best = max(ys.sum(), len(ys) - ys.sum())  # depth-0 fallback
        for f in range(X.shape[1]):
            xs = X[mask, f]
            order = np.argsort(xs)
            xs_sorted, ys_sorted = xs[order], ys[order]
            pos_prefix = np.cumsum(ys_sorted)
            total_pos = pos_prefix[-1]
            for i in range(len(xs_sorted) - 1):
                if xs_sorted[i] == xs_sorted[i + 1]:
                    continue
                left_n, left_pos = i + 1, pos_prefix[i]
                right_n, right_pos = len(ys_sorted) - left_n, total_pos - left_pos
                correct = max(left_pos, left_n - left_pos) + max(right_pos, right_n - right_pos)
                best = max(best, correct)
        return best

    n = len(y)
    best_total = 0
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            left = X[:, f] < 0.5 * (lo + hi)
            best_total = max(best_total, best_child_accuracy(left) + best_child_accuracy(~left))
    return best_total / n


class TestSplitSearch:
    def test_matches_brute_force_on_random_data(self, rng):
        for trial in range(12):
            n = int(rng.integers(20, 200))
            n_feat = int(rng.integers(1, 6))
            X = rng.normal(size=(n, n_feat))
            if trial % 3 == 0:
                X = np.round(X)  # force ties
            p = rng.uniform(0.1, 0.9, size=n)
            y = (rng.random(n) < 0.5).astype(float)
            g, h = p - y, p * (1 - p)
            expected = brute_force_best_split(X, g, h)
            got = gbdt.best_split(X, g, h)
            if expected is None:
                assert got is None
            else:
                assert got is not None
                gain, f, thr, _, _ = got
                assert (f, thr) == (expected[1], pytest.approx(expected[2]))
                assert gain == pytest.approx(expected[0], abs=1e-9)

    def test_duplicate_feature_tie_breaks_low_index(self, rng):
        X = rng.normal(size=(80, 1))
        X = np.hstack([X, X])  # identical columns
        y = (X[:, 0] > 0).astype(float)
        g, h = 0.5 - y, np.full(80, 0.25)
        got = gbdt.best_split(X, g, h)
        assert got is not None and got[1] == 0

    def test_constant_features_have_no_split(self):
        X = np.ones((50, 3))
        g = np.linspace(-1, 1, 50)
        h = np.full(50, 0.25)
        assert gbdt.best_split(X, g, h) is None

    def test_min_child_weight_filters(self, rng):
        X = np.array([[0.0], [1.0], [1.0], [1.0], [1.0], [1.0], [1.0], [1.0]])
        g = np.array([-1.0, 1, 1, 1, 1, 1, 1, 1])
        h = np.full(8, 0.25)
        # left child would carry hessian 0.25 < 1.0
        assert gbdt.best_split(X, g, h, min_child_weight=1.0) is None
        assert gbdt.best_split(X, g, h, min_child_weight=0.1) is not None


class TestTraining:
    def test_all_negative_labels(self, rng):
        X = rng.normal(size=(120, 4))
        y = np.zeros(120)
        model = gbdt.train(X, y, TrainConfig(rounds=100, max_depth=6))
        p = gbdt.predict_proba(model, X)
        assert np.all(p <= 0.01)

    def test_xor_depth2(self, rng):
        X = rng.random((200, 2))
        y = ((X[:, 0] > 0.5) ^ (X[:, 1] > 0.5)).astype(float)
        assert exhaustive_depth2_accuracy(X, y) == 1.0  # oracle: separable at depth 2
        model = gbdt.train(X, y, TrainConfig(rounds=100, max_depth=2))
        acc = ((gbdt.predict_proba(model, X) > 0.5) == y).mean()
        assert acc == 1.0

    def test_hand_computed_leaf_weights(self):
        # single round, lr=1, one feature, perfectly split: p=0.5 everywhere,
        # g = p - y = +-0.5, h = 0.25; each side sums G=+-2.0, H=1.0,
        # so leaf weight -G/(H+lambda) = -+1.0 exactly
        X = np.array([[0.0]] * 4 + [[1.0]] * 4)
        y = np.array([0.0] * 4 + [1.0] * 4)
        cfg = TrainConfig(rounds=1, max_depth=1, learning_rate=1.0)
        model = gbdt.train(X, y, cfg)
        tree = model.trees[0]
        assert tree.feature[0] == 0 and tree.threshold[0] == 0.5
        left, right = tree.left[0], tree.right[0]
        assert tree.value[left] == -1.0
        assert tree.value[right] == 1.0
        assert tree.cover[left] == 1.0 and tree.cover[right] == 1.0

    def test_loss_non_increasing(self, rng):
        for _ in range(3):
            n = int(rng.integers(50, 200))
            X = rng.normal(size=(n, 5))
            y = (X @ rng.normal(size=5) + rng.normal(size=n) > 0).astype(float)
            model = gbdt.train(X, y, TrainConfig(rounds=25, max_depth=3))
            losses = model.train_loss
            assert len(losses) == 26
            assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_row_permutation_leaves_model_unchanged(self, rng):
        X = rng.normal(size=(300, 6))
        X[:, 0] = np.round(X[:, 0])  # ties in one column
        y = (X[:, 1] > 0).astype(float)
        cfg = TrainConfig(rounds=8, max_depth=4)
        base = gbdt.serialize(gbdt.train(X, y, cfg))
        perm = rng.permutation(300)
        permuted = gbdt.serialize(gbdt.train(X[perm], y[perm], cfg))
        assert base == permuted

    def test_retrain_is_deterministic(self, rng):
        X = rng.normal(size=(150, 4))
        y = (rng.random(150) < 0.4).astype(float)
        cfg = TrainConfig(rounds=6, max_depth=3)
        assert gbdt.serialize(gbdt.train(X, y, cfg)) == gbdt.serialize(gbdt.train(X, y, cfg))

    def test_rejects_bad_inputs(self, rng):
        with pytest.raises(ValueError):
            gbdt.train(np.empty((0, 3)), np.empty(0), TrainConfig())
        X = rng.normal(size=(10, 3))
        with pytest.raises(ValueError):
            gbdt.train(X, np.zeros(9), TrainConfig())
        X_nan = X.copy()
        X_nan[0, 0] = np.nan
        with pytest.raises(ValueError, match="NaN"):
            gbdt.train(X_nan, np.zeros(10), TrainConfig())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(rounds=0).validate()
        with pytest.raises(ValueError):
            TrainConfig(max_depth=0).validate()
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0).validate()
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=1.5).validate()


def single_split_model(feature=0, threshold=0.5, lo=-1.0, hi=2.0):
    tree = Tree(
        feature=np.array([feature, -1, -1], dtype=np.int32),
        threshold=np.array([threshold, 0.0, 0.0]),
        left=np.array([1, -1, -1], dtype=np.int32),
        right=np.array([2, -1, -1], dtype=np.int32),
        default_left=np.array([True, True, True]),
        value=np.array([0.0, lo, hi]),
        cover=np.array([10.0, 6.0, 4.0]),
    )
    return TreeEnsemble(
        config=TrainConfig(), base_score=0.5, learning_rate=1.0, n_features=2,
        trees=[tree],
    )


class TestPrediction:
    def test_empty_ensemble_returns_base(self):
        model = TreeEnsemble(config=TrainConfig(), base_score=0.3,
                             learning_rate=0.3, n_features=3, trees=[])
        assert gbdt.predict_proba(model, np.zeros(3)) == pytest.approx(0.3)

    def test_monotone_single_split(self):
        model = single_split_model()
        low = gbdt.predict_proba(model, np.array([0.0, 0.0]))
        high = gbdt.predict_proba(model, np.array([1.0, 0.0]))
        assert high > low

    def test_batch_equals_single(self, rng):
        X = rng.normal(size=(40, 5))
        y = (X[:, 0] > 0).astype(float)
        model = gbdt.train(X, y, TrainConfig(rounds=5, max_depth=3))
        batch = gbdt.predict_proba(model, X)
        singles = np.array([gbdt.predict_proba(model, x) for x in X])
        np.testing.assert_array_equal(batch, singles)

    def test_dimension_mismatch(self):
        model = single_split_model()
        with pytest.raises(ValueError, match="features"):
            gbdt.predict_proba(model, np.zeros(5))

    def test_nan_routes_default_branch(self):
        model = single_split_model()
        p_nan = gbdt.predict_proba(model, np.array([np.nan, 0.0]))
        p_left = gbdt.predict_proba(model, np.array([0.0, 0.0]))
        assert p_nan == p_left


class TestSerialization:
    def test_round_trip_identical_predictions(self, rng):
        X = rng.normal(size=(200, 6))
        y = (X[:, 2] > 0.2).astype(float)
        model = gbdt.train(X, y, TrainConfig(rounds=12, max_depth=4))
        clone = gbdt.deserialize(gbdt.serialize(model))
        pts = rng.normal(size=(1000, 6))
        np.testing.assert_array_equal(gbdt.predict_proba(model, pts),
                                      gbdt.predict_proba(clone, pts))

    def test_serialize_is_involution(self, rng):
        X = rng.normal(size=(50, 3))
        y = (X[:, 0] > 0).astype(float)
        model = gbdt.train(X, y, TrainConfig(rounds=3, max_depth=2))
        text = gbdt.serialize(model)
        assert gbdt.serialize(gbdt.deserialize(text)) == text

    def test_corrupted_stream(self):
        with pytest.raises(ModelFormatError):
            gbdt.deserialize('{"format": "vdep-gbdt", "version": 1, "trees": [')
        with pytest.raises(ModelFormatError):
            gbdt.deserialize(b"\xff\xfe garbage")

    def test_wrong_format_or_version(self):
        with pytest.raises(ModelFormatError, match="format"):
            gbdt.deserialize('{"something": "else"}')
        with pytest.raises(ModelFormatError, match="version"):
            gbdt.deserialize('{"format": "vdep-gbdt", "version": 99}')

    def test_golden_model_predictions(self, rng):
        """A committed model file must keep predicting the committed values."""
        import pathlib

        data_dir = pathlib.Path(__file__).parent / "data"
        model = gbdt.load_model(data_dir / "golden_model.json")
        golden = np.loadtxt(data_dir / "golden_points.csv", delimiter=",", skiprows=1)
        X, expected = golden[:, :-1], golden[:, -1]
        got = gbdt.predict_proba(model, X)
        np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)
