"""Seeded synthetic series with known weekly and daily structure.

Used for the bundled sample files and for tests that need a generator to
compare recovered components against.
"""

from __future__ import annotations

from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from deepgb.series import TimeSeries, calendar_codes

# a Thursday, so a 33-day series ends on a Monday and its last three days
# are Saturday, Sunday, Monday
DEFAULT_START = "2020-08-06"


def _epoch(date: str) -> int:
    return int(datetime.fromisoformat(date).replace(tzinfo=timezone.utc).timestamp())


def hourly_timestamps(days: int, start: str = DEFAULT_START) -> np.ndarray:
    return _epoch(start) + 3600 * np.arange(24 * days, dtype=np.int64)


def weekend_dip(dayofweek) -> np.ndarray:
    """-1 on Saturday and Sunday, 0 otherwise."""
    return -(np.asarray(dayofweek) >= 5).astype(np.float64)


def weekly_hourly_components(timestamps, level=10.0, daily_amp=5.0, weekend_amp=3.0):
    """(weekly, hourly) noiseless components; the series is level + weekly + hourly."""
    hour = calendar_codes(timestamps, "hour")
    dow = calendar_codes(timestamps, "dayofweek")
    weekly = weekend_amp * weekend_dip(dow)
    hourly = daily_amp * np.sin(2 * np.pi * hour / 24)
    return weekly, hourly


def weekly_hourly(
    days: int = 33,
    seed: int = 0,
    noise: float = 0.5,
    level: float = 10.0,
    daily_amp: float = 5.0,
    weekend_amp: float = 3.0,
    start: str = DEFAULT_START,
    name: str = "synthetic",
) -> TimeSeries:
    """``level + daily_amp*sin(2*pi*hour/24) + weekend_amp*weekend_dip + N(0, noise**2)``."""
    t = hourly_timestamps(days, start)
    weekly, hourly = weekly_hourly_components(t, level, daily_amp, weekend_amp)
    rng = np.random.default_rng(seed)
    return TimeSeries(name, t, level + weekly + hourly + noise * rng.standard_normal(len(t)))


def business_load(
    days: int = 33, seed: int = 1, noise: float = 1.0, start: str = DEFAULT_START, name: str = "business"
) -> TimeSeries:
    """Office-hours bump on weekdays only, so hour and day interact."""
    t = hourly_timestamps(days, start)
    hour = calendar_codes(t, "hour")
    dow = calendar_codes(t, "dayofweek")
    bump = np.exp(-0.5 * ((hour - 13) / 3.0) ** 2)
    weekday = (dow < 5).astype(np.float64)
    rng = np.random.default_rng(seed)
    y = 20 + 25 * bump * weekday + 4 * bump + noise * rng.standard_normal(len(t))
    return TimeSeries(name, t, y)


def benchmark_suite(days: int = 33, seed: int = 7) -> list[TimeSeries]:
    """Three hourly series sharing timestamps, for the bundled benchmark file."""
    return [
        weekly_hourly(days, seed=seed, name="weekly_hourly"),
        business_load(days, seed=seed + 1, name="business_hours"),
        weekly_hourly(
            days, seed=seed + 2, noise=1.0, level=50.0, daily_amp=12.0, weekend_amp=15.0, name="strong_weekend"
        ),
    ]


def bundled_path(name: str) -> Path:
    """Path of a CSV shipped with the package (``sample.csv`` or ``suite.csv``)."""
    return Path(str(resources.files("deepgb") / "data" / name))
