"""Univariate time series: ingestion, calendar features, splitting, scaling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from deepgb.errors import ConfigError, ParseError, SpacingError, SplitError

SECONDS_PER_DAY = 86400

# name -> cardinality; codes are always 0-based
CALENDAR_FEATURES = {
    "dayofweek": 7,
    "hour": 24,
    "month": 12,
    "dayofmonth": 31,
}

DEFAULT_FEATURES = ("dayofweek", "hour")


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly spaced observations with epoch-second timestamps."""

    name: str
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if ts.ndim != 1 or vals.ndim != 1 or len(ts) != len(vals):
            raise ValueError(
                f"series {self.name!r}: timestamps and values must be 1-D and of equal length"
            )
        if len(ts) < 2:
            raise ValueError(f"series {self.name!r}: need at least 2 observations, got {len(ts)}")
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"series {self.name!r}: values must be finite")
        steps = np.diff(ts)
        if steps[0] <= 0 or np.any(steps != steps[0]):
            raise SpacingError(
                f"series {self.name!r}: timestamps must be strictly increasing with constant spacing"
            )
        ts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    @property
    def step(self) -> int:
        return int(self.timestamps[1] - self.timestamps[0])

    @property
    def points_per_day(self) -> float:
        return SECONDS_PER_DAY / self.step

    def slice(self, start: int, stop: int) -> "TimeSeries":
        return TimeSeries(self.name, self.timestamps[start:stop], self.values[start:stop])

    def future_timestamps(self, horizon: int) -> np.ndarray:
        return self.timestamps[-1] + self.step * np.arange(1, horizon + 1, dtype=np.int64)


@dataclass(frozen=True)
class CalendarFeature:
    name: str
    cardinality: int
    codes: np.ndarray

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int64)
        if codes.size and (codes.min() < 0 or codes.max() >= self.cardinality):
            raise ValueError(f"feature {self.name!r}: codes outside [0, {self.cardinality})")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    def __len__(self):
        return len(self.codes)


@dataclass(frozen=True)
class FeatureMatrix:
    """Ordered calendar features plus a continuous time index.

    Feature order is the boosting stage order.
    """

    features: tuple
    time_index: np.ndarray

    def __post_init__(self):
        feats = tuple(self.features)
        tidx = np.asarray(self.time_index, dtype=np.float64)
        lengths = {len(f) for f in feats} | {len(tidx)}
        if len(lengths) != 1:
            raise ValueError(f"feature lengths differ: {sorted(lengths)}")
        tidx.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "time_index", tidx)

    def __len__(self):
        return len(self.time_index)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def cardinalities(self) -> list[int]:
        return [f.cardinality for f in self.features]

    def codes(self) -> np.ndarray:
        """Integer code matrix of shape (n, n_features)."""
        if not self.features:
            return np.zeros((len(self), 0), dtype=np.int64)
        return np.column_stack([f.codes for f in self.features])

    def slice(self, start: int, stop: int) -> "FeatureMatrix":
        return FeatureMatrix(
            tuple(CalendarFeature(f.name, f.cardinality, f.codes[start:stop]) for f in self.features),
            self.time_index[start:stop],
        )


@dataclass(frozen=True)
class SplitSpec:
    train_days: int = 30
    test_days: int = 3

    def __post_init__(self):
        if self.train_days < 1 or self.test_days < 1:
            raise ConfigError("train_days and test_days must be >= 1")


@dataclass(frozen=True)
class Scaler:
    """Mean/stddev record; stddev is 1 for constant training data."""

    mean: float
    std: float

    def transform(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def inverse(self, z) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.std + self.mean


# --------------------------------------------------------------------------
# ingestion
# --------------------------------------------------------------------------


def _parse_timestamp(text: str, where: str) -> int:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise ParseError(f"{where}: cannot parse timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _parse_value(text: str, where: str) -> float:
    text = text.strip()
    if text == "":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{where}: malformed numeric cell {text!r}") from None


def _clean(name: str, timestamps: np.ndarray, values: np.ndarray, missing_policy: str) -> TimeSeries:
    present = np.isfinite(values)
    if not present.any():
        raise ParseError(f"series {name!r}: series empty after cleaning")
    first, last = np.flatnonzero(present)[[0, -1]]
    timestamps = timestamps[first : last + 1]
    values = values[first : last + 1].copy()
    present = present[first : last + 1]
    if not present.all():
        if missing_policy != "interpolate":
            raise SpacingError(
                f"series {name!r}: interior missing values with missing_policy={missing_policy!r}"
            )
        idx = np.arange(len(values))
        values[~present] = np.interp(idx[~present], idx[present], values[present])
    if len(values) < 2:
        raise ParseError(f"series {name!r}: fewer than 2 observations after cleaning")
    steps = np.diff(timestamps)
    if steps[0] <= 0 or np.any(steps != steps[0]):
        raise SpacingError(f"series {name!r}: non-uniform timestamp spacing after cleaning")
    return TimeSeries(name, timestamps, values)


def load_csv(path, layout: str = "long", missing_policy: str = "interpolate") -> list[TimeSeries]:
    """Read one (long layout) or many (wide layout) series from a CSV file.

    Long files have a ``timestamp,value`` header, timestamps as epoch seconds
    or ISO-8601. Wide files have a ``series,<date>,<date>,...`` header and one
    series per row. Leading and trailing gaps are dropped; interior gaps are
    linearly interpolated when ``missing_policy`` is ``"interpolate"`` and are
    an error otherwise.
    """
    if layout not in ("long", "wide"):
        raise ConfigError(f"unknown layout {layout!r}; expected 'long' or 'wide'")
    if missing_policy not in ("interpolate", "drop_leading"):
        raise ConfigError(f"unknown missing_policy {missing_policy!r}")
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header, body = rows[0], rows[1:]

    if layout == "long":
        cols = [h.strip().lower() for h in header]
        if cols[:2] != ["timestamp", "value"]:
            raise ParseError(f"{path}: long layout needs header 'timestamp,value', got {header!r}")
        ts = np.empty(len(body), dtype=np.int64)
        vals = np.empty(len(body), dtype=np.float64)
        for i, row in enumerate(body, start=2):
            if len(row) < 2:
                raise ParseError(f"{path}: row {i}: expected 2 columns, got {len(row)}")
            ts[i - 2] = _parse_timestamp(row[0], f"{path}: row {i}, column timestamp")
            vals[i - 2] = _parse_value(row[1], f"{path}: row {i}, column value")
        return [_clean(path.stem, ts, vals, missing_policy)]

    ts = np.array(
        [_parse_timestamp(h, f"{path}: header column {j + 2}") for j, h in enumerate(header[1:])],
        dtype=np.int64,
    )
    out = []
    for i, row in enumerate(body, start=2):
        name = row[0].strip()
        cells = row[1:] + [""] * (len(ts) - len(row) + 1)
        if len(cells) > len(ts):
            raise ParseError(f"{path}: row {i}: more cells than header dates")
        vals = np.array(
            [_parse_value(c, f"{path}: row {i}, column {j + 2}") for j, c in enumerate(cells)],
            dtype=np.float64,
        )
        out.append(_clean(name, ts, vals, missing_policy))
    return out


def write_long_csv(ts: TimeSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "value"])
        for t, v in zip(ts.timestamps, ts.values):
            w.writerow([int(t), repr(float(v))])


def write_wide_csv(series: Sequence[TimeSeries], path) -> None:
    ts = series[0].timestamps
    if any(not np.array_equal(s.timestamps, ts) for s in series):
        raise ValueError("wide layout needs all series on the same timestamps")
    header = ["series"] + [
        datetime.fromtimestamp(int(t), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%S") for t in ts
    ]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for s in series:
            w.writerow([s.name] + [repr(float(v)) for v in s.values])


# --------------------------------------------------------------------------
# features
# --------------------------------------------------------------------------


def calendar_codes(timestamps, name: str) -> np.ndarray:
    """0-based UTC calendar codes for epoch-second timestamps."""
    t = np.asarray(timestamps, dtype=np.int64)
    days = np.floor_divide(t, SECONDS_PER_DAY)
    if name == "dayofweek":
        # 1970-01-01 was a Thursday; Monday = 0
        return (days + 3) % 7
    if name == "hour":
        return np.floor_divide(t - days * SECONDS_PER_DAY, 3600)
    d = days.astype("datetime64[D]")
    if name == "month":
        return d.astype("datetime64[M]").astype(np.int64) % 12
    if name == "dayofmonth":
        return (d - d.astype("datetime64[M]").astype("datetime64[D]")).astype(np.int64)
    raise ConfigError(f"unsupported calendar feature {name!r}; choose from {sorted(CALENDAR_FEATURES)}")


def extract_calendar_features(
    ts: TimeSeries | np.ndarray,
    names: Sequence[str] = DEFAULT_FEATURES,
    time_ref: tuple[int, int] | None = None,
) -> FeatureMatrix:
    """Calendar codes for each requested feature, in the given order.

    ``time_ref`` is the (first, last) timestamp pair mapped to 0 and 1 by the
    time index; it defaults to the endpoints of ``ts``. Passing the training
    span when featurising future timestamps keeps the index consistent.
    """
    names = list(names)
    if not names:
        raise ConfigError("at least one calendar feature is required")
    for n in names:
        if n not in CALENDAR_FEATURES:
            raise ConfigError(f"unsupported calendar feature {n!r}; choose from {sorted(CALENDAR_FEATURES)}")
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate calendar features in {names}")
    t = np.asarray(ts.timestamps if isinstance(ts, TimeSeries) else ts, dtype=np.int64)
    if time_ref is None:
        time_ref = (int(t[0]), int(t[-1])) if len(t) else (0, 1)
    t0, t1 = time_ref
    span = (t1 - t0) or 1
    feats = tuple(CalendarFeature(n, CALENDAR_FEATURES[n], calendar_codes(t, n)) for n in names)
    return FeatureMatrix(feats, (t - t0) / span)


# --------------------------------------------------------------------------
# splitting and scaling
# --------------------------------------------------------------------------


def split_bounds(n: int, step: int, spec: SplitSpec) -> tuple[slice, slice]:
    per_day = SECONDS_PER_DAY / step
    n_train = int(round(spec.train_days * per_day))
    n_test = int(round(spec.test_days * per_day))
    if n_test < 1 or n_train < 1:
        raise SplitError(f"step {step}s is too coarse for a {spec.train_days}/{spec.test_days} day split")
    need = n_train + n_test
    if need > n:
        raise SplitError(
            f"split {spec.train_days}/{spec.test_days} days needs {need} points, only {n} available"
        )
    return slice(n - need, n - n_test), slice(n - n_test, n)


def train_test_split(ts: TimeSeries, fm: FeatureMatrix, spec: SplitSpec = SplitSpec()):
    """Trailing holdout of ``test_days`` with the ``train_days`` window just before it.

    Returns ``((train_ts, train_fm), (test_ts, test_fm))``.
    """
    if len(fm) != len(ts):
        raise ValueError("feature matrix and series lengths differ")
    tr, te = split_bounds(len(ts), ts.step, spec)
    return (
        (ts.slice(tr.start, tr.stop), fm.slice(tr.start, tr.stop)),
        (ts.slice(te.start, te.stop), fm.slice(te.start, te.stop)),
    )


def standardize(values) -> tuple[Scaler, np.ndarray]:
    """Zero-mean, unit (population) stddev scaling of training values."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) < 2:
        raise ValueError("standardize needs at least 2 values")
    mean = math.fsum(v) / len(v)
    std = float(np.sqrt(np.mean((v - mean) ** 2)))
    if std == 0.0 or not np.isfinite(std):
        std = 1.0
    scaler = Scaler(mean, std)
    return scaler, scaler.transform(v)
