import numpy as np
import pytest

from tfboost.cart import TreeConfig
from tfboost.errors import DimensionError, DomainError
from tfboost.geometry import sample_directions
from tfboost.learners import MultiIndexTree, MultiStartConfig, fit_type_a, fit_type_b, predict_mit


@pytest.fixture
def planted():
    rng = np.random.default_rng(11)
    S = rng.normal(size=(400, 5))
    c = np.array([0.6, -0.48, 0.0, 0.64, 0.0])
    u = np.where(S @ c > 0.2, 1.5, -1.0) + 0.05 * rng.normal(size=400)
    return S, u, c


class TestTypeA:
    def test_recovers_planted_direction(self, planted):
        S, u, c = planted
        m = fit_type_a(S, None, u, 1, TreeConfig(1), np.random.default_rng(0))
        assert abs(m.directions[0] @ c) > 0.99
        assert m.directions[0, 0] >= 0

    def test_objective_is_tree_sse(self, planted):
        S, u, _ = planted
        m = fit_type_a(S, None, u, 2, TreeConfig(2), np.random.default_rng(0))
        fitted = predict_mit(m, S)
        assert m.objective == pytest.approx(((u - fitted) ** 2).sum(), rel=1e-10)
        np.testing.assert_allclose(np.linalg.norm(m.directions, axis=1), 1.0)

    def test_scalars_appended(self, planted):
        S, _, _ = planted
        z = np.random.default_rng(3).normal(size=(400, 1))
        u = np.where(z[:, 0] > 0, 1.0, 0.0)
        m = fit_type_a(S, z, u, 1, TreeConfig(1), np.random.default_rng(0))
        assert m.tree.root().feature == 1
        with pytest.raises(DimensionError):
            predict_mit(m, S)

    def test_single_basis_function(self):
        S = np.linspace(-1, 1, 50)[:, None]
        m = fit_type_a(S, None, (S[:, 0] > 0).astype(float), 1, TreeConfig(1), np.random.default_rng(0))
        np.testing.assert_array_equal(m.directions, [[1.0]])

    def test_errors(self):
        S = np.zeros((6, 3))
        with pytest.raises(DomainError):
            fit_type_a(S, None, np.zeros(6), 0, TreeConfig(1), np.random.default_rng(0))
        with pytest.raises(DomainError):
            fit_type_a(S, None, np.zeros(6), 1, TreeConfig(1, min_node=5), np.random.default_rng(0))
        with pytest.raises(DimensionError):
            fit_type_a(S, None, np.zeros(5), 1, TreeConfig(1), np.random.default_rng(0))


class TestTypeB:
    def test_pool_and_prediction(self, planted):
        S, u, _ = planted
        m = fit_type_b(S, None, u, 50, TreeConfig(2), np.random.default_rng(0))
        assert m.directions.shape == (50, 5) and m.pool_size == 50
        np.testing.assert_array_equal(predict_mit(m, S), m.tree.train_fitted)

    def test_explicit_pool(self, planted):
        S, u, c = planted
        m = fit_type_b(S, None, u, 1, TreeConfig(1), None, pool=c[None, :])
        assert abs(m.tree.root().threshold - 0.2) < 0.1

    def test_compact(self, planted):
        S, u, _ = planted
        z = np.random.default_rng(1).normal(size=(400, 2))
        m = fit_type_b(S, z, u, 200, TreeConfig(3), np.random.default_rng(0))
        c = m.compact()
        assert c.K == len(set(m.tree.used_features()[m.tree.used_features() < 200]))
        assert c.K <= 7
        Snew = np.random.default_rng(2).normal(size=(300, 5))
        znew = np.random.default_rng(3).normal(size=(300, 2))
        np.testing.assert_array_equal(predict_mit(c, Snew, znew), predict_mit(m, Snew, znew))

    def test_dict_roundtrip(self, planted):
        S, u, _ = planted
        m = fit_type_b(S, None, u, 30, TreeConfig(2), np.random.default_rng(0)).compact()
        back = MultiIndexTree.from_dict(m.to_dict())
        np.testing.assert_array_equal(predict_mit(back, S), predict_mit(m, S))


class TestFlipDirection:
    def test_flip_gives_identical_predictions(self):
        # 20 seeded models, predictions agree exactly
        for seed in range(20):
            rng = np.random.default_rng(seed)
            S = rng.normal(size=(80, 4))
            u = np.sin(S @ sample_directions(4, 1, rng)[0]) + 0.1 * rng.normal(size=80)
            m = fit_type_b(S, None, u, 10, TreeConfig(3, min_node=3), rng)
            Snew = rng.normal(size=(200, 4))
            for k in m.tree.used_features():
                diff = np.abs(predict_mit(m.flip_direction(int(k)), Snew) - predict_mit(m, Snew))
                assert diff.max() == 0.0


class TestDocumentedExamples:
    def test_constant_residuals(self):
        S = np.random.default_rng(0).normal(size=(40, 3))
        m = fit_type_a(S, None, np.full(40, 0.7), 1, TreeConfig(2), np.random.default_rng(0))
        # zero up to a few ulps of rounding in each residual around the mean
        assert m.tree.n_nodes == 1 and m.objective <= 40 * (10 * np.finfo(float).eps) ** 2

    def test_small_planted_problem(self):
        rng = np.random.default_rng(4)
        S = rng.normal(size=(60, 3))
        c = np.array([0.8, 0.0, -0.6])
        u = (S @ c > 0).astype(float)
        m = fit_type_a(S, None, u, 1, TreeConfig(1), np.random.default_rng(1))
        assert abs(m.directions[0] @ c) > 0.95

    def test_pool_with_planted_column(self):
        rng = np.random.default_rng(6)
        S = rng.normal(size=(200, 4))
        c = np.array([0.5, 0.5, 0.5, 0.5])
        pool = np.vstack([sample_directions(4, 9, rng), c])
        u = (S @ c > 0.3).astype(float)
        m = fit_type_b(S, None, u, 10, TreeConfig(1), None, pool=pool)
        assert m.tree.root().feature == 9

    def test_type_b_deterministic(self, planted):
        S, u, _ = planted
        a = fit_type_b(S, None, u, 40, TreeConfig(2), np.random.default_rng(9))
        b = fit_type_b(S, None, u, 40, TreeConfig(2), np.random.default_rng(9))
        np.testing.assert_array_equal(a.directions, b.directions)
        assert a.to_dict() == b.to_dict()

    def test_zero_scores_give_constant_output(self, planted):
        S, u, _ = planted
        m = fit_type_b(S, None, u, 40, TreeConfig(3), np.random.default_rng(0))
        out = predict_mit(m, np.zeros((25, 5)))
        assert np.unique(out).size == 1

    def test_training_sse_identity(self, planted):
        S, u, _ = planted
        m = fit_type_b(S, None, u, 40, TreeConfig(3), np.random.default_rng(0))
        r = u - predict_mit(m, S)
        assert r @ r == pytest.approx(m.tree.train_sse, rel=1e-12)
