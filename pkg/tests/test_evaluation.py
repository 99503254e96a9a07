import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepgb import nn, synthetic
from deepgb.boosting import BoostConfig
from deepgb.errors import ConfigError, MetricError
from deepgb.evaluation import (
    BaselineSpec,
    DeepGbSpec,
    EvalReport,
    EvalRow,
    backtest,
    default_period,
    fit_ar,
    linear_ar,
    render_table,
    report_csv,
    seasonal_naive,
    smape,
)
from deepgb.gbdt import GbdtConfig
from deepgb.series import SplitSpec, TimeSeries

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
pairs = st.integers(1, 30).flatmap(lambda n: st.tuples(st.lists(finite, min_size=n, max_size=n),
                                                       st.lists(finite, min_size=n, max_size=n)))


class TestSmape:
    def test_hand_value(self):
        assert abs(smape([100.0], [50.0]) - 200 * 50 / 150) < 1e-9
        assert abs(smape([100.0], [50.0]) - 66.667) < 1e-3

    def test_perfect(self):
        assert smape([3.0, -2.0, 0.0], [3.0, -2.0, 0.0]) == 0.0

    def test_zero_over_zero(self):
        assert smape([0.0], [0.0]) == 0.0

    def test_one_side_zero_is_200(self):
        assert smape([0.0, 5.0, 0.0], [1.0, 0.0, -3.0]) == 200.0

    @pytest.mark.parametrize("a,f", [([1.0], [1.0, 2.0]), ([], [])])
    def test_errors(self, a, f):
        with pytest.raises(MetricError):
            smape(a, f)

    @settings(max_examples=200, deadline=None)
    @given(pairs)
    def test_symmetric_and_bounded(self, af):
        a, f = af
        s = smape(a, f)
        assert s == smape(f, a)
        assert 0.0 <= s <= 200.0

    @settings(max_examples=200, deadline=None)
    @given(pairs, st.floats(1e-3, 1e3))
    def test_scale_invariant(self, af, c):
        a, f = map(np.array, af)
        assert smape(c * a, c * f) == pytest.approx(smape(a, f), abs=1e-9)


class TestBaselines:
    def test_tiling(self):
        np.testing.assert_array_equal(seasonal_naive(np.array([1.0, 3.0, 7.0]), 4, 2), [3, 7, 3, 7])

    def test_period_one(self):
        np.testing.assert_array_equal(seasonal_naive(np.array([1.0, 2.0, 9.0]), 3, 1), 9.0)

    def test_too_short(self):
        with pytest.raises(ValueError):
            seasonal_naive(np.ones(3), 2, 5)

    def test_weekly_noiseless_is_exact(self):
        ts = synthetic.weekly_hourly(days=33, noise=0.0)
        pred = seasonal_naive(ts.values[:720], 72, 168)
        assert smape(ts.values[720:], pred) == 0.0

    def test_ar_recovers_coefficient(self):
        y = 10.0 * 0.5 ** np.arange(40)
        intercept, phi = fit_ar(y, 1)
        assert abs(phi[0] - 0.5) < 1e-6
        assert abs(intercept) < 1e-6

    def test_ar_constant(self):
        np.testing.assert_allclose(linear_ar(np.full(50, 4.0), 3, 5), 4.0, atol=1e-6)

    def test_ar_order_too_large(self):
        with pytest.raises(ValueError):
            linear_ar(np.arange(5.0), 10, 2)

    def test_default_period(self):
        assert default_period(3600) == 24
        assert default_period(86400) == 7

    def test_unknown_baseline(self):
        with pytest.raises(ConfigError):
            BaselineSpec("sarima")


FAST = DeepGbSpec(boost=BoostConfig(train=nn.TrainConfig(epochs=5)), gbdt=GbdtConfig(n_trees=50))


class TestBacktest:
    def test_index_ranges_disjoint_and_trailing(self):
        ts = synthetic.weekly_hourly(days=35)
        report = backtest([ts], [BaselineSpec()], SplitSpec(30, 3))
        row = report.rows[0]
        assert row.train_range == (48, 768)
        assert row.test_range == (768, 840)
        assert row.train_range[1] <= row.test_range[0]

    def test_naive_row_hand_check(self):
        ts = synthetic.weekly_hourly(days=33)
        report = backtest([ts], [BaselineSpec()])
        expected = smape(ts.values[720:], np.tile(ts.values[696:720], 3))
        assert report.rows[0].smape == expected

    def test_failures_recorded(self):
        short = TimeSeries("short", 1_600_000_000 + 3600 * np.arange(48), np.arange(48.0))
        ok = synthetic.weekly_hourly(days=33, name="ok")
        report = backtest([short, ok], [BaselineSpec()])
        assert report.get("short", "seasonal_naive").error
        assert report.get("short", "seasonal_naive").smape is None
        assert report.get("ok", "seasonal_naive").smape is not None

    def test_model_failure_does_not_stop_batch(self):
        ts = synthetic.weekly_hourly(days=33)
        report = backtest([ts], [BaselineSpec("linear_ar", order=5000), BaselineSpec()])
        assert report.get("synthetic", "linear_ar").error
        assert report.get("synthetic", "seasonal_naive").smape is not None

    def test_deterministic(self):
        ts = synthetic.weekly_hourly(days=33)
        specs = [FAST, BaselineSpec(), BaselineSpec("linear_ar")]
        a = backtest([ts], specs)
        b = backtest([ts], specs)
        assert [r.smape for r in a.rows] == [r.smape for r in b.rows]
        assert all(r.train_seconds >= 0 for r in a.rows)

    def test_sorted_by_series(self):
        s = [synthetic.weekly_hourly(days=33, name=n) for n in ("b", "a")]
        assert [r.series for r in backtest(s, [BaselineSpec()]).rows] == ["a", "b"]

    def test_deepgb_beats_naive_on_clean_fixture(self):
        ts = synthetic.weekly_hourly(days=33, seed=0)
        report = backtest([ts], [DeepGbSpec(), BaselineSpec(period=24)])
        assert report.get("synthetic", "deepgb").smape < report.get("synthetic", "seasonal_naive").smape


class TestReport:
    def _report(self, a, b):
        return EvalReport([EvalRow("x", "m1", a, 1.234), EvalRow("x", "m2", b, 0.5)], SplitSpec())

    def test_two_decimals(self):
        text = render_table(self._report(3.14159, 5.0))
        assert "3.14*" in text and "5.00" in text and "1.23" in text
        assert "3.141" not in text

    def test_tie_flags_both(self):
        text = render_table(self._report(2.0, 2.0))
        assert text.count("2.00*") == 2

    def test_empty(self):
        with pytest.raises(ValueError):
            render_table(EvalReport([], SplitSpec()))

    def test_failure_rendered_as_na(self):
        report = EvalReport([EvalRow("x", "m1", None, None, error="boom"), EvalRow("x", "m2", 1.0, 0.1)], SplitSpec())
        assert "n/a" in render_table(report)

    def test_csv(self):
        lines = report_csv(self._report(1.5, 2.5)).splitlines()
        assert lines[0] == "series,model,smape,train_seconds"
        assert lines[1].startswith("x,m1,1.5,")
        assert len(lines) == 3
