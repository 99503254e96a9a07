import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepgb import nn, synthetic
from deepgb.boosting import (
    BoostConfig,
    DeepGbModel,
    boosted_predict,
    deepgb_fit,
    deepgb_predict,
    gradient_boost,
    mean_abs,
)
from deepgb.errors import ConfigError, ShapeError
from deepgb.gbdt import GbdtConfig, GbdtModel
from deepgb.series import Scaler, TimeSeries, extract_calendar_features

FAST_GBDT = GbdtConfig(n_trees=20)


class MeanModel:
    def fit(self, x, target):
        self.value = float(np.mean(target))

    def predict(self, x):
        return np.full(len(x), self.value)


class OracleModel:
    """Predicts exactly the target it was fit on."""

    def fit(self, x, target):
        self.target = np.array(target)

    def predict(self, x):
        return self.target


class TestGradientBoost:
    def test_two_mean_predictors_hand_trace(self):
        # F0 = y; model 1 predicts 2 -> F1 = [-1,0,1]; model 2 predicts 0 -> delta 0 -> stop
        y = np.array([1.0, 2.0, 3.0])
        trace = []
        fitted = gradient_boost(np.zeros((3, 1)), y, [MeanModel(), MeanModel()],
                                BoostConfig(epsilon=1e-3), on_stage=lambda m, F, d: trace.append((m, F.copy(), d)))
        assert len(fitted) == 1
        assert [t[0] for t in trace] == [1, 2]
        np.testing.assert_array_equal(trace[0][1], [-1.0, 0.0, 1.0])
        assert trace[1][2] == 0.0

    def test_perfect_first_model_leaves_zero_residual(self):
        y = np.array([4.0, -1.0, 2.5])
        trace = []
        fitted = gradient_boost(np.zeros((3, 1)), y, [OracleModel(), MeanModel()],
                                on_stage=lambda m, F, d: trace.append(F.copy()))
        np.testing.assert_array_equal(trace[0], 0.0)
        assert len(fitted) == 1
        np.testing.assert_array_equal(boosted_predict(fitted, np.zeros((3, 1))), y)

    def test_large_epsilon_gives_single_stage(self):
        y = np.array([1.0, 2.0, 3.0, 10.0])
        x = np.zeros((4, 1))
        first = MeanModel()
        first.fit(x, y)
        eps = mean_abs(y - first.predict(x)) + 0.1
        fitted = gradient_boost(x, y, [MeanModel(), MeanModel(), MeanModel()], BoostConfig(epsilon=eps))
        assert len(fitted) == 1

    def test_rho_scales_update(self):
        y = np.array([2.0, 4.0])
        trace = []
        gradient_boost(np.zeros((2, 1)), y, [MeanModel()], BoostConfig(rho=0.5),
                       on_stage=lambda m, F, d: trace.append(F.copy()))
        np.testing.assert_array_equal(trace[0], [0.5, 2.5])

    def test_empty_models(self):
        with pytest.raises(ConfigError):
            gradient_boost(np.zeros((2, 1)), np.zeros(2), [])

    @pytest.mark.parametrize("kw", [dict(epsilon=0.0), dict(rho=-1.0), dict(max_stages=0)])
    def test_config_validation(self, kw):
        with pytest.raises(ConfigError):
            BoostConfig(**kw)


def _dow_series(days=28, seed=0):
    t = synthetic.hourly_timestamps(days)
    dow = extract_calendar_features(t, ["dayofweek"]).features[0].codes
    effect = np.array([1.0, 3.0, -2.0, 0.5, 4.0, -1.0, 2.0])
    ts = TimeSeries("dow", t, effect[dow])
    return ts, extract_calendar_features(ts, ["dayofweek", "hour"])


class TestDeepGbFit:
    def test_stage_one_correlates_with_weekly_component(self, fitted):
        weekly, _ = synthetic.weekly_hourly_components(fitted.train.timestamps)
        stage1 = fitted.model.stages[0]
        assert stage1.feature == "dayofweek"
        assert np.corrcoef(stage1.prediction, weekly)[0, 1] > 0.9

    def test_stage_two_reduces_residual_variance(self, fitted):
        s1, s2 = fitted.model.stages
        assert np.var(s2.residual) < np.var(s1.residual)

    def test_residual_bookkeeping(self, fitted):
        z = fitted.model.scaler.transform(fitted.train.values)
        for s in fitted.model.stages:
            np.testing.assert_allclose(s.residual + s.prediction, z, rtol=0, atol=1e-9)

    def test_training_prediction_identity(self, fitted):
        z = fitted.model.scaler.transform(fitted.train.values)
        net, trees = fitted.model.predict_parts(fitted.train_fm)
        final = fitted.model.stages[-1]
        np.testing.assert_allclose(net, z - final.residual, rtol=0, atol=1e-9)
        np.testing.assert_allclose(net + trees, fitted.model.scaler.transform(fitted.model.predict(fitted.train_fm)),
                                   rtol=0, atol=1e-9)

    def test_frozen_tables_unchanged_by_later_stages(self, fitted):
        final = [t.weights for t in fitted.model.composite.embeddings]
        for m, snap in enumerate(fitted.snapshots):
            for i in range(m + 1):
                assert np.array_equal(snap[i], final[i])
        assert all(t.frozen for t in fitted.model.composite.embeddings)

    def test_stage_networks_share_tables(self, fitted):
        first, second = fitted.model.stages
        assert second.model.embeddings[0] is first.model.embeddings[0]

    def test_max_stages_one(self):
        ts, fm = _dow_series()
        cfg = BoostConfig(max_stages=1, train=nn.TrainConfig(epochs=5))
        model = deepgb_fit(ts, fm, cfg, FAST_GBDT)
        assert len(model.stages) == 1
        assert len(model.composite.embeddings) == 1

    @pytest.mark.parametrize("seed", [0, 1])
    def test_pure_dayofweek_stops_after_first_stage(self, seed):
        ts, fm = _dow_series()
        cfg = BoostConfig(epsilon=0.05, train=nn.TrainConfig(dropout_rate=0.0, seed=seed))
        model = deepgb_fit(ts, fm, cfg, FAST_GBDT)
        assert len(model.stages) == 1
        assert model.stages[0].stopped

    def test_stopping_is_final(self):
        ts, fm = _dow_series()
        cfg = BoostConfig(epsilon=0.05, train=nn.TrainConfig(dropout_rate=0.0))
        model = deepgb_fit(ts, fm, cfg, FAST_GBDT)
        flags = [s.stopped for s in model.stages]
        assert flags.count(True) <= 1
        if True in flags:
            assert flags.index(True) == len(flags) - 1
        for s in model.stages[:-1]:
            assert s.delta >= cfg.epsilon and mean_abs(s.residual) >= cfg.epsilon

    def test_bit_reproducible(self):
        ts, fm = _dow_series(days=14)
        cfg = BoostConfig(train=nn.TrainConfig(epochs=3))
        a = deepgb_fit(ts, fm, cfg, FAST_GBDT)
        b = deepgb_fit(ts, fm, cfg, FAST_GBDT)
        assert np.array_equal(a.predict(fm), b.predict(fm))
        for ta, tb in zip(a.composite.embeddings, b.composite.embeddings):
            assert np.array_equal(ta.weights, tb.weights)

    def test_too_many_stages(self):
        ts, fm = _dow_series(days=14)
        with pytest.raises(ConfigError):
            deepgb_fit(ts, fm, BoostConfig(max_stages=3), FAST_GBDT)

    def test_length_mismatch(self):
        ts, fm = _dow_series(days=14)
        with pytest.raises(ShapeError):
            deepgb_fit(ts, fm.slice(0, 10), BoostConfig(), FAST_GBDT)


@pytest.fixture(scope="module")
def small():
    ts, fm = _dow_series(days=14)
    return deepgb_fit(ts, fm, BoostConfig(train=nn.TrainConfig(epochs=3)), FAST_GBDT), fm


class TestPredict:
    def test_additive(self, small):
        model, fm = small
        net, trees = model.predict_parts(fm)
        np.testing.assert_allclose(model.predict(fm), model.scaler.inverse(net + trees), rtol=0, atol=1e-12)

    def test_zero_tree_ensemble_is_network_only(self, small):
        model, fm = small
        bare = DeepGbModel(model.composite, GbdtModel(0.0, [], 0.1, 2), model.scaler, model.stages,
                           model.feature_names, model.cardinalities, model.time_ref, model.step)
        net, _ = model.predict_parts(fm)
        np.testing.assert_array_equal(deepgb_predict(bare, fm), model.scaler.inverse(net))

    def test_zero_network_constant_trees(self, small):
        model, fm = small
        head = [nn.DenseLayer(np.zeros_like(l.weights), np.zeros_like(l.bias), l.activation)
                for l in model.composite.head]
        net = nn.CompositeEmbeddingModel(model.composite.embeddings, head, 0.0)
        m = DeepGbModel(net, GbdtModel(0.7, [], 0.1, 2), Scaler(3.0, 2.0), model.stages,
                        model.feature_names, model.cardinalities, model.time_ref, model.step)
        np.testing.assert_array_equal(m.predict(fm), 3.0 + 2.0 * 0.7)

    def test_cardinality_mismatch_names_feature(self, small):
        model, fm = small
        other = extract_calendar_features(np.arange(0, 86400 * 3, 3600), ["dayofweek", "dayofmonth"])
        with pytest.raises(ShapeError, match="hour"):
            model.predict(other)

    def test_out_of_range_code_names_feature(self, small):
        model, _ = small
        with pytest.raises(ShapeError, match="dayofweek"):
            model.composite.predict(np.array([[9, 0]]))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=30),
       st.integers(1, 4), st.floats(0.1, 1.0))
def test_generic_boost_residual_identity(values, n_models, rho):
    # after any number of stages, y = F_m + rho * sum of kept predictions
    y = np.array(values)
    x = np.zeros((len(y), 1))
    trace = []
    fitted = gradient_boost(x, y, [MeanModel() for _ in range(n_models)], BoostConfig(epsilon=1e-12, rho=rho),
                            on_stage=lambda m, F, d: trace.append(F.copy()))
    if fitted:
        F_last = trace[len(fitted) - 1]
        np.testing.assert_allclose(F_last + boosted_predict(fitted, x, rho), y, rtol=0, atol=1e-9)
