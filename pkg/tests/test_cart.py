import numpy as np
import pytest

from tfboost import kernels
from tfboost.cart import Leaf, Split, Tree, TreeConfig, fit_tree, predict_tree
from tfboost.errors import DimensionError, DomainError

BACKENDS = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])


def sse(v):
    return float(((v - v.mean()) ** 2).sum()) if v.size else 0.0


def oracle_tree(X, y, depth, min_node, min_improve=0.0, tie_tol=1e-10):
    """Exhaustive greedy CART written independently of the package kernels.

    Every (feature, threshold) pair with threshold halfway between two
    consecutive distinct values is scored by direct SSE recomputation.
    """
    n = y.size
    if depth == 0 or n < 2 * min_node or y.max() == y.min():
        return ("leaf", y.mean(), n)
    parent = sse(y)
    cands = []
    for j in range(X.shape[1]):
        vals = np.unique(X[:, j])
        for a, b in zip(vals[:-1], vals[1:]):
            thr = 0.5 * (a + b)
            if thr >= b:
                thr = a
            left = X[:, j] <= thr
            if left.sum() < min_node or (~left).sum() < min_node:
                continue
            cands.append((parent - sse(y[left]) - sse(y[~left]), j, thr))
    if not cands:
        return ("leaf", y.mean(), n)
    tol = tie_tol * max(parent, 1e-300)
    best = max(c[0] for c in cands)
    if not best > max(min_improve, tol):
        return ("leaf", y.mean(), n)
    gain, j, thr = next(c for c in cands if c[0] >= best - tol)
    left = X[:, j] <= thr
    return ("split", j, thr,
            oracle_tree(X[left], y[left], depth - 1, min_node, min_improve, tie_tol),
            oracle_tree(X[~left], y[~left], depth - 1, min_node, min_improve, tie_tol))


def same_tree(node, ref):
    if ref[0] == "leaf":
        return isinstance(node, Leaf) and node.count == ref[2] and abs(node.value - ref[1]) < 1e-10
    return (isinstance(node, Split) and node.feature == ref[1] and abs(node.threshold - ref[2]) < 1e-12
            and same_tree(node.left, ref[3]) and same_tree(node.right, ref[4]))


def random_instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 13))
    p = int(rng.integers(1, 4))
    if rng.random() < 0.5:
        # coarse integer values force ties in both features and responses
        X = rng.integers(0, 4, size=(n, p)).astype(float)
        y = rng.integers(0, 3, size=n).astype(float)
    else:
        X = rng.normal(size=(n, p))
        y = rng.normal(size=n)
    depth = int(rng.integers(1, 4))
    min_node = int(rng.integers(1, 4))
    return X, y, depth, min_node


class TestOracle:
    @pytest.mark.parametrize("backend", BACKENDS)
    def test_matches_exhaustive_search(self, backend):
        # acceptance: 200 seeded instances with n <= 12, p <= 3
        be = kernels.get_backend(backend)
        for seed in range(200):
            X, y, depth, min_node = random_instance(seed)
            tree = fit_tree(X, y, TreeConfig(depth, min_node), backend=be)
            ref = oracle_tree(X, y, depth, min_node)
            assert same_tree(tree.root(), ref), f"instance {seed}"

    def test_min_improvement_blocks_weak_splits(self):
        X = np.arange(10.0)[:, None]
        y = np.r_[np.zeros(5), np.full(5, 0.1)]
        # the only useful split removes SSE 0.025
        assert fit_tree(X, y, TreeConfig(1, 1, 0.03)).n_nodes == 1
        assert fit_tree(X, y, TreeConfig(1, 1, 0.02)).n_nodes == 3


class TestTree:
    @pytest.fixture
    def data(self, rng):
        X = rng.normal(size=(300, 4))
        y = np.where(X[:, 2] > 0.3, 2.0, -1.0) + 0.1 * rng.normal(size=300)
        return X, y

    def test_recovers_step(self, data):
        tree = fit_tree(*data, TreeConfig(1))
        sp = tree.root()
        assert sp.feature == 2 and abs(sp.threshold - 0.3) < 0.1

    def test_prediction_equals_fitted(self, data):
        tree = fit_tree(*data, TreeConfig(3))
        np.testing.assert_array_equal(predict_tree(tree, data[0]), tree.train_fitted)

    def test_routing_uses_less_equal(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        tree = fit_tree(X, np.array([0.0, 0.0, 1.0, 1.0]), TreeConfig(1, 1))
        t = tree.root().threshold
        assert predict_tree(tree, np.array([[t]]))[0] == 0.0

    def test_leaf_means_and_counts(self, data):
        tree = fit_tree(*data, TreeConfig(2))
        leaves = np.flatnonzero(tree.is_leaf)
        assert tree.count[leaves].sum() == 300
        # fitted values are leaf means, so residuals sum to zero
        assert abs((data[1] - tree.train_fitted).sum()) < 1e-9

    def test_depth_limit(self, data):
        for depth in (1, 2, 3, 4):
            assert fit_tree(*data, TreeConfig(depth)).depth() <= depth

    def test_constant_response(self):
        tree = fit_tree(np.random.default_rng(0).normal(size=(20, 2)), np.full(20, 3.0))
        assert tree.n_nodes == 1 and tree.value[0] == 3.0

    def test_negate_feature(self, data):
        X, y = data
        tree = fit_tree(X, y, TreeConfig(3))
        neg = X.copy()
        neg[:, 2] = -neg[:, 2]
        flipped = tree.negate_feature(2)
        # agreement off the measure-zero set x_j == threshold
        np.testing.assert_array_equal(predict_tree(flipped, neg), predict_tree(tree, X))

    def test_dict_roundtrip(self, data):
        tree = fit_tree(*data, TreeConfig(3))
        back = Tree.from_dict(tree.to_dict())
        np.testing.assert_array_equal(predict_tree(back, data[0]), predict_tree(tree, data[0]))

    def test_from_dict_validates(self, data):
        doc = fit_tree(*data, TreeConfig(2)).to_dict()
        doc["left"] = doc["left"][:-1]
        with pytest.raises(DimensionError):
            Tree.from_dict(doc)

    def test_errors(self):
        with pytest.raises(DomainError):
            fit_tree(np.zeros((0, 2)), np.zeros(0))
        with pytest.raises(DomainError):
            fit_tree(np.array([[np.nan], [1.0]]), np.zeros(2))
        with pytest.raises(DimensionError):
            fit_tree(np.zeros((4, 2)), np.zeros(3))
        tree = fit_tree(np.random.default_rng(0).normal(size=(20, 2)), np.arange(20.0))
        with pytest.raises(DimensionError):
            predict_tree(tree, np.zeros((3, 5)))

    @pytest.mark.parametrize("kw", [{"max_depth": 0}, {"min_node": 0}, {"min_split_improvement": -1}])
    def test_config_validation(self, kw):
        with pytest.raises(DomainError):
            TreeConfig(**kw)
