import numpy as np
import pytest

from deepgb import synthetic
from deepgb.boosting import BoostConfig, deepgb_fit
from deepgb.series import SplitSpec, extract_calendar_features, train_test_split

FEATURES = ["dayofweek", "hour"]


class FittedSynthetic:
    """Default-config fit on the 30-day training window of the seeded weekly+hourly series."""

    def __init__(self, seed=0):
        self.series = synthetic.weekly_hourly(days=33, seed=seed)
        fm = extract_calendar_features(self.series, FEATURES)
        (self.train, _), (self.test, _) = train_test_split(self.series, fm, SplitSpec(30, 3))
        self.train_fm = extract_calendar_features(self.train, FEATURES)
        self.test_fm = extract_calendar_features(self.test, FEATURES, (int(self.train.timestamps[0]), int(self.train.timestamps[-1])))
        self.snapshots = []  # tables copied right after each stage

        def snap(stage):
            self.snapshots.append([t.weights.copy() for t in stage.model.embeddings])

        self.model = deepgb_fit(self.train, self.train_fm, BoostConfig(), on_stage=snap)


@pytest.fixture(scope="session")
def fitted():
    return FittedSynthetic()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""
    lines = request.config.stash.setdefault(_VERDICTS, {})

    def record(number: int, title: str, ok: bool, detail: str = ""):
        lines[number] = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, {})
    if lines:
        terminalreporter.section("acceptance")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
