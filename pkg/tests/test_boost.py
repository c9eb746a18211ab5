import json

import numpy as np
import pytest

from tfboost.boost import (
    BoostConfig,
    HuberLoss,
    SquaredLoss,
    deserialize,
    fit_boost,
    fit_depth_grid,
    golden_section,
    line_search,
    mspe,
    parse_loss,
    predict_boost,
    serialize,
    staged_predict,
)
from tfboost.cart import TreeConfig
from tfboost.errors import DataError, DomainError, ModelFormatError, UnsupportedVersionError
from tfboost.fda import FunctionalSample, Grid, project_scores
from tfboost.learners import predict_mit

from conftest import smooth_sample


def small_cfg(**kw):
    base = dict(learner="B", P=20, t_max=40, tree=TreeConfig(2))
    base.update(kw)
    return BoostConfig(**base)


@pytest.fixture(scope="module")
def fitted(basis01):
    grid = Grid.uniform(0.0, 1.0, 100)
    rng = np.random.default_rng(3)
    train, valid = smooth_sample(120, grid, rng), smooth_sample(60, grid, rng)
    test = smooth_sample(80, grid, rng)
    model = fit_boost(train, valid, basis01, small_cfg(t_max=80))
    return model, train, valid, test


class TestLosses:
    def test_squared_gradient_is_residual(self):
        assert SquaredLoss().neg_gradient(np.array([3.0]), np.array([1.0]))[0] == 2.0

    def test_huber_gradient_clipped(self):
        g = HuberLoss(1.0).neg_gradient(np.array([5.0, -5.0, 0.5]), np.zeros(3))
        np.testing.assert_array_equal(g, [1.0, -1.0, 0.5])

    def test_huber_value_continuous_at_delta(self):
        h = HuberLoss(2.0)
        a, b = h.value(np.array([2.0 - 1e-9, 2.0 + 1e-9]), np.zeros(2))
        assert a == pytest.approx(b, abs=1e-8) and a == pytest.approx(2.0)

    def test_huber_initial_small_delta_is_median(self):
        y = np.array([0.0, 1.0, 2.0, 3.0, 100.0])
        assert abs(HuberLoss(1e-3).initial(y) - 2.0) < 2e-3

    def test_huber_initial_large_delta_is_mean(self):
        y = np.random.default_rng(0).normal(size=50)
        assert HuberLoss(1e3).initial(y) == pytest.approx(y.mean(), abs=1e-5)

    def test_parse_loss(self):
        assert isinstance(parse_loss("squared"), SquaredLoss)
        assert parse_loss("huber:0.5").delta == 0.5
        assert parse_loss("huber").delta == 1.345
        for bad in ("absolute", "huber:x", "huber:-1"):
            with pytest.raises(DataError):
                parse_loss(bad)


class TestLineSearch:
    def test_golden_section_quadratic(self):
        assert golden_section(lambda a: (a - 0.3) ** 2, 0, 1) == pytest.approx(0.3, abs=1e-6)

    def test_golden_section_boundary(self):
        assert golden_section(lambda a: a, 0, 1) == 0.0

    def test_squared_closed_form(self):
        rng = np.random.default_rng(0)
        y, F, h = rng.normal(size=(3, 30))
        alpha = line_search(SquaredLoss(), y, F, h)
        grid = np.linspace(alpha - 0.1, alpha + 0.1, 201)
        vals = [((y - F - a * h) ** 2).sum() for a in grid]
        assert grid[int(np.argmin(vals))] == pytest.approx(alpha, abs=1e-3)

    def test_zero_tree_gives_zero_step(self):
        y = np.ones(5)
        assert line_search(SquaredLoss(), y, np.zeros(5), np.zeros(5)) == 0.0
        assert line_search(HuberLoss(), y, np.zeros(5), np.zeros(5)) == 0.0

    def test_huber_step_in_range(self):
        rng = np.random.default_rng(1)
        y, F, h = rng.normal(size=(3, 30))
        a = line_search(HuberLoss(), y, F, h)
        assert 0.0 <= a <= 100.0


class TestBoosting:
    def test_constant_response(self, basis01, unit_grid):
        rng = np.random.default_rng(0)
        tr, va = smooth_sample(40, unit_grid, rng), smooth_sample(20, unit_grid, rng)
        tr = FunctionalSample(tr.grid, tr.values, response=np.full(40, 2.5))
        va = FunctionalSample(va.grid, va.values, response=np.full(20, 2.5))
        m = fit_boost(tr, va, basis01, small_cfg(t_max=5))
        np.testing.assert_array_equal(predict_boost(m, va), 2.5)
        assert all(a == 0.0 for _, a in m.steps)

    def test_train_loss_non_increasing(self, fitted):
        model = fitted[0]
        trace = np.r_[np.var(fitted[1].response), model.train_loss]
        assert np.all(np.diff(trace) <= 1e-12 * trace[:-1])

    def test_t_stop_is_argmin_plus_one(self, basis01, unit_grid):
        # acceptance: 50 seeded fits
        for seed in range(50):
            rng = np.random.default_rng(100 + seed)
            tr, va = smooth_sample(40, unit_grid, rng), smooth_sample(20, unit_grid, rng)
            m = fit_boost(tr, va, basis01, small_cfg(t_max=15, P=5, tree=TreeConfig(1), seed=seed))
            assert m.t_stop == int(np.argmin(m.valid_loss)) + 1
            assert m.valid_loss[m.t_stop - 1] == m.valid_loss.min()

    def test_validation_trace_bookkeeping(self, fitted):
        model, _, valid, _ = fitted
        staged = staged_predict(model, valid)
        recomputed = ((staged[1:] - valid.response) ** 2).mean(axis=1)
        np.testing.assert_allclose(recomputed, model.valid_loss, rtol=1e-10)

    def test_zero_iterations_give_f0(self, fitted):
        model, train, _, test = fitted
        np.testing.assert_array_equal(predict_boost(model, test, t=0), model.f0)
        assert model.f0 == pytest.approx(train.response.mean())

    def test_increments_telescope(self, fitted):
        model, _, _, test = fitted
        staged = staged_predict(model, test)
        S = project_scores(test, model.basis)
        for t in (1, 10, 40):
            tree, alpha = model.steps[t - 1]
            np.testing.assert_allclose(staged[t] - staged[t - 1],
                                       model.gamma * alpha * predict_mit(tree, S), atol=1e-12)
        np.testing.assert_allclose(staged[model.t_stop], predict_boost(model, test), atol=1e-12)

    def test_mspe_recompute(self, fitted):
        model, _, _, test = fitted
        r = predict_boost(model, test) - test.response
        assert mspe(model, test) == pytest.approx(np.mean(r * r), rel=1e-12)

    def test_learns_signal(self, fitted):
        model, train, _, test = fitted
        assert mspe(model, test) < 0.5 * np.var(test.response)

    def test_type_a(self, basis01, small_problem):
        tr, va = small_problem
        m = fit_boost(tr, va, basis01, BoostConfig(learner="A", K=1, t_max=3))
        assert all(tree.kind == "A" and tree.K == 1 for tree, _ in m.steps)
        assert np.all(np.diff(m.train_loss) <= 0)

    def test_huber_trace_non_increasing(self, basis01, small_problem):
        tr, va = small_problem
        m = fit_boost(tr, va, basis01, small_cfg(loss="huber:0.5", t_max=20))
        loss = HuberLoss(0.5)
        trace = np.r_[loss.value(tr.response, m.f0).mean(), m.train_loss]
        assert np.all(np.diff(trace) <= 1e-12)

    def test_deterministic(self, basis01, small_problem):
        tr, va = small_problem
        a = fit_boost(tr, va, basis01, small_cfg(seed=4, t_max=10))
        b = fit_boost(tr, va, basis01, small_cfg(seed=4, t_max=10))
        c = fit_boost(tr, va, basis01, small_cfg(seed=5, t_max=10))
        assert serialize(a) == serialize(b) != serialize(c)

    def test_depth_grid(self, basis01, small_problem):
        tr, va = small_problem
        best, scores = fit_depth_grid(tr, va, basis01, small_cfg(t_max=10), depths=(1, 2, 3))
        assert sorted(scores) == [1, 2, 3]
        assert scores[best.config.tree.max_depth] == min(scores.values())

    def test_depth_grid_ties_go_shallow(self, basis01, unit_grid):
        rng = np.random.default_rng(0)
        tr, va = smooth_sample(40, unit_grid, rng), smooth_sample(20, unit_grid, rng)
        tr = FunctionalSample(tr.grid, tr.values, response=np.ones(40))
        va = FunctionalSample(va.grid, va.values, response=np.ones(20))
        best, scores = fit_depth_grid(tr, va, basis01, small_cfg(t_max=3), depths=(3, 1, 2))
        assert len(set(scores.values())) == 1 and best.config.tree.max_depth == 1

    def test_errors(self, fitted, basis01):
        model, train, valid, test = fitted
        with pytest.raises(DomainError):
            predict_boost(model, test, t=len(model.steps) + 1)
        unlabeled = FunctionalSample(valid.grid, valid.values)
        with pytest.raises(DataError):
            fit_boost(train, unlabeled, basis01, small_cfg())
        with pytest.raises(DataError):
            mspe(model, unlabeled)
        for kw in ({"gamma": 0.0}, {"gamma": 1.0}, {"t_max": 0}, {"learner": "C"}, {"P": 0}):
            with pytest.raises(DomainError):
                BoostConfig(**kw)


class TestPersistence:
    def test_roundtrip_exact(self, fitted):
        model, _, _, test = fitted
        text = serialize(model)
        back = deserialize(text)
        assert np.max(np.abs(predict_boost(back, test) - predict_boost(model, test))) == 0.0
        assert serialize(back) == text
        assert back.t_stop == model.t_stop

    def test_truncated(self, fitted):
        text = serialize(fitted[0])
        with pytest.raises(ModelFormatError, match="line 1, column"):
            deserialize(text[: len(text) // 2])

    def test_wrong_format_and_version(self, fitted):
        doc = json.loads(serialize(fitted[0]))
        doc["version"] = 9
        with pytest.raises(UnsupportedVersionError):
            deserialize(json.dumps(doc))
        doc["format"] = "other"
        with pytest.raises(ModelFormatError):
            deserialize(json.dumps(doc))

    def test_missing_field(self, fitted):
        doc = json.loads(serialize(fitted[0]))
        del doc["steps"][0]["learner"]["tree"]
        with pytest.raises(ModelFormatError):
            deserialize(json.dumps(doc))
