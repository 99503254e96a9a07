"""SMAPE, baseline forecasters, the trailing-window backtest and its report."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from deepgb.boosting import BoostConfig, DeepGbModel, deepgb_fit, deepgb_predict
from deepgb.errors import ConfigError, DeepGbError, MetricError
from deepgb.gbdt import GbdtConfig
from deepgb.series import (
    DEFAULT_FEATURES,
    SplitSpec,
    TimeSeries,
    extract_calendar_features,
    split_bounds,
)

log = logging.getLogger(__name__)

RIDGE_DAMPING = 1e-8


def smape(actual, forecast) -> float:
    """Symmetric MAPE in percent, 0..200.

    Terms with ``|a| + |f| == 0`` contribute 0.
    """
    a = np.asarray(actual, dtype=np.float64)
    f = np.asarray(forecast, dtype=np.float64)
    if a.shape != f.shape or a.ndim != 1:
        raise MetricError(f"smape needs two equal-length 1-D sequences, got {a.shape} and {f.shape}")
    if a.size == 0:
        raise MetricError("smape of an empty sequence")
    denom = np.abs(a) + np.abs(f)
    num = 2.0 * np.abs(f - a)
    terms = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0)
    return 100.0 * float(np.mean(terms))


# --------------------------------------------------------------------------
# baselines
# --------------------------------------------------------------------------


def seasonal_naive(train: TimeSeries | np.ndarray, horizon: int, period: int) -> np.ndarray:
    """Repeat the last full period of ``train`` over ``horizon`` steps."""
    y = np.asarray(train.values if isinstance(train, TimeSeries) else train, dtype=np.float64)
    if period < 1:
        raise ConfigError("period must be >= 1")
    if len(y) < period:
        raise ValueError(f"training length {len(y)} shorter than period {period}")
    last = y[len(y) - period :]
    return np.resize(last, horizon)


def fit_ar(y, p: int) -> tuple[float, np.ndarray]:
    """Least-squares AR(p) fit; returns (intercept, lag coefficients for lags 1..p).

    Falls back to a ridge solve with damping 1e-8 if the design is singular.
    """
    y = np.asarray(y, dtype=np.float64)
    if p < 1:
        raise ConfigError("AR order must be >= 1")
    if len(y) <= p + 1:
        raise ValueError(f"AR({p}) needs more than {p + 1} observations, got {len(y)}")
    n = len(y) - p
    X = np.ones((n, p + 1))
    for k in range(1, p + 1):
        X[:, k] = y[p - k : len(y) - k]
    target = y[p:]
    gram = X.T @ X
    rhs = X.T @ target
    if np.linalg.matrix_rank(gram) < p + 1:
        coef = np.linalg.solve(gram + RIDGE_DAMPING * np.eye(p + 1), rhs)
    else:
        coef = np.linalg.solve(gram, rhs)
    return float(coef[0]), coef[1:]


def linear_ar(train: TimeSeries | np.ndarray, p: int, horizon: int) -> np.ndarray:
    """Recursive multi-step forecast from a least-squares AR(p) model."""
    y = np.asarray(train.values if isinstance(train, TimeSeries) else train, dtype=np.float64)
    intercept, phi = fit_ar(y, p)
    hist = list(y[-p:])
    out = np.empty(horizon)
    for h in range(horizon):
        nxt = intercept + float(np.dot(phi, hist[::-1][:p]))
        out[h] = nxt
        hist.append(nxt)
        hist = hist[-p:]
    return out


# --------------------------------------------------------------------------
# model specs used by the backtest
# --------------------------------------------------------------------------


def default_period(step: int) -> int:
    """Points per day for sub-daily data, a week for daily or coarser."""
    per_day = 86400 // step if step else 1
    return per_day if per_day > 1 else 7


@dataclass
class BaselineSpec:
    kind: str = "seasonal_naive"
    period: int | None = None  # None: one day of points (a week for daily data)
    order: int = 24

    def __post_init__(self):
        if self.kind not in ("seasonal_naive", "linear_ar"):
            raise ConfigError(f"unknown baseline kind {self.kind!r}")
        if self.period is not None and self.period < 1:
            raise ConfigError("period must be >= 1")
        if self.order < 1:
            raise ConfigError("order must be >= 1")

    @property
    def name(self) -> str:
        return self.kind

    def fit(self, train: TimeSeries):
        if self.kind == "seasonal_naive":
            period = self.period or default_period(train.step)
            seasonal_naive(train, 0, period)  # validates length
            return lambda horizon: seasonal_naive(train, horizon, period)
        fit_ar(train.values, self.order)
        return lambda horizon: linear_ar(train, self.order, horizon)


@dataclass
class DeepGbSpec:
    features: tuple = DEFAULT_FEATURES
    boost: BoostConfig = field(default_factory=BoostConfig)
    gbdt: GbdtConfig = field(default_factory=GbdtConfig)
    name: str = "deepgb"

    def fit(self, train: TimeSeries):
        model = fit_deepgb_series(train, self.features, self.boost, self.gbdt)
        return lambda horizon: forecast_deepgb(model, train, horizon)


def fit_deepgb_series(ts: TimeSeries, features, boost: BoostConfig, gbdt: GbdtConfig) -> DeepGbModel:
    fm = extract_calendar_features(ts, features)
    return deepgb_fit(ts, fm, boost, gbdt)


def forecast_deepgb(model: DeepGbModel, history: TimeSeries, horizon: int) -> np.ndarray:
    """Forecast ``horizon`` steps after ``history`` from calendar features alone."""
    future = history.future_timestamps(horizon)
    if horizon == 0:
        return np.empty(0)
    fm = extract_calendar_features(future, model.feature_names, model.time_ref)
    return deepgb_predict(model, fm)


# --------------------------------------------------------------------------
# backtest and report
# --------------------------------------------------------------------------


@dataclass
class EvalRow:
    series: str
    model: str
    smape: float | None
    train_seconds: float | None
    train_range: tuple = (0, 0)
    test_range: tuple = (0, 0)
    error: str | None = None


@dataclass
class EvalReport:
    rows: list
    protocol: SplitSpec

    def models(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r.model not in seen:
                seen.append(r.model)
        return seen

    def series(self) -> list[str]:
        return sorted({r.series for r in self.rows})

    def get(self, series: str, model: str) -> EvalRow | None:
        for r in self.rows:
            if r.series == series and r.model == model:
                return r
        return None

    def winners(self, series: str) -> list[str]:
        """Models with the lowest SMAPE on ``series`` (all of them on a tie)."""
        scored = [r for r in self.rows if r.series == series and r.smape is not None]
        if not scored:
            return []
        best = min(r.smape for r in scored)
        return [r.model for r in scored if r.smape == best]


def backtest(series_list, model_specs, split: SplitSpec = SplitSpec()) -> EvalReport:
    """Fit each model on the training window and score it on the holdout.

    A model that fails on a series gets a row with ``error`` set; the rest of
    the batch carries on.
    """
    rows = []
    for ts in sorted(series_list, key=lambda s: s.name):
        try:
            tr, te = split_bounds(len(ts), ts.step, split)
        except DeepGbError as exc:
            for spec in model_specs:
                rows.append(EvalRow(ts.name, spec.name, None, None, error=str(exc)))
            continue
        train = ts.slice(tr.start, tr.stop)
        actual = ts.values[te]
        for spec in model_specs:
            try:
                t0 = time.perf_counter()
                forecaster = spec.fit(train)
                seconds = time.perf_counter() - t0
                forecast = forecaster(len(actual))
                score = smape(actual, forecast)
            except (DeepGbError, ValueError, np.linalg.LinAlgError) as exc:
                log.warning("%s on %s failed: %s", spec.name, ts.name, exc)
                rows.append(
                    EvalRow(ts.name, spec.name, None, None, (tr.start, tr.stop), (te.start, te.stop), str(exc))
                )
                continue
            log.info("%s on %s: SMAPE %.3f in %.2fs", spec.name, ts.name, score, seconds)
            rows.append(EvalRow(ts.name, spec.name, score, seconds, (tr.start, tr.stop), (te.start, te.stop)))
    return EvalReport(rows, split)


def _fmt(x, digits=2) -> str:
    return "n/a" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.{digits}f}"


def render_table(report: EvalReport) -> str:
    """Plain-text table: SMAPE then training seconds per model, best SMAPE starred."""
    if not report.rows:
        raise ValueError("cannot render an empty report")
    models = report.models()
    header = ["series"] + [f"smape[{m}]" for m in models] + [f"secs[{m}]" for m in models]
    lines = []
    for s in report.series():
        win = set(report.winners(s))
        cells = [s]
        for m in models:
            r = report.get(s, m)
            cell = _fmt(r.smape if r else None)
            cells.append(cell + ("*" if m in win else ""))
        for m in models:
            r = report.get(s, m)
            cells.append(_fmt(r.train_seconds if r else None))
        lines.append(cells)
    widths = [max(len(row[i]) for row in [header] + lines) for i in range(len(header))]
    out = io.StringIO()
    out.write("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip() + "\n")
    out.write("  ".join("-" * w for w in widths) + "\n")
    for row in lines:
        out.write("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() + "\n")
    out.write(
        f"SMAPE in percent (lower is better), * = best; training seconds are wall clock; "
        f"split {report.protocol.train_days}/{report.protocol.test_days} days\n"
    )
    return out.getvalue()


def report_csv(report: EvalReport) -> str:
    """CSV text with header ``series,model,smape,train_seconds``; failures leave cells empty."""
    if not report.rows:
        raise ValueError("cannot write an empty report")
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["series", "model", "smape", "train_seconds"])
    for r in sorted(report.rows, key=lambda r: r.series):
        w.writerow([
            r.series,
            r.model,
            "" if r.smape is None else repr(r.smape),
            "" if r.train_seconds is None else f"{r.train_seconds:.6f}",
        ])
    return out.getvalue()
