"""Run configuration: a flat ``key = value`` file plus ``DEEPGB_*`` env overrides.

Precedence, lowest first: built-in defaults, config file, environment,
explicit command-line flags. Unknown keys are rejected.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields
from pathlib import Path

from deepgb.boosting import BoostConfig
from deepgb.errors import ConfigError
from deepgb.evaluation import BaselineSpec, DeepGbSpec
from deepgb.gbdt import GbdtConfig
from deepgb.nn import TrainConfig
from deepgb.series import SplitSpec

ENV_PREFIX = "DEEPGB_"


@dataclass
class RunConfig:
    data: str = ""
    layout: str = "long"
    missing_policy: str = "interpolate"
    series: str = ""  # name of the series to fit; empty = first in file
    features: tuple = ("dayofweek", "hour")
    embedding_rule: str = "half"
    # boosting
    epsilon: float = 1e-3
    max_stages: int = 0  # 0 = one stage per feature
    rho: float = 1.0
    # network training
    epochs: int = 100
    batch_size: int = 32
    dropout_rate: float = 0.1
    hidden_sizes: tuple = (32, 32, 32, 32)
    learning_rate: float = 0.0002
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-8
    window_size: int = 1
    time2vec: bool = False
    time2vec_k: int = 4
    # residual tree ensemble
    n_trees: int = 800
    max_depth: int = 3
    gbdt_learning_rate: float = 0.1
    min_samples_leaf: int = 1
    # protocol
    train_days: int = 30
    test_days: int = 3
    seasonal_period: int = 0  # 0 = points per day (7 for daily data)
    ar_order: int = 24
    seed: int = 0
    out: str = "."
    plots: bool = True

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, seed=self.seed,
            dropout_rate=self.dropout_rate, hidden_sizes=self.hidden_sizes,
            learning_rate=self.learning_rate, rmsprop_decay=self.rmsprop_decay,
            rmsprop_epsilon=self.rmsprop_epsilon, embedding_rule=self.embedding_rule,
            window_size=self.window_size, time2vec=self.time2vec, time2vec_k=self.time2vec_k,
        )

    def boost_config(self) -> BoostConfig:
        return BoostConfig(self.epsilon, self.max_stages or None, self.rho, self.train_config())

    def gbdt_config(self) -> GbdtConfig:
        return GbdtConfig(self.n_trees, self.max_depth, self.gbdt_learning_rate, self.min_samples_leaf)

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.train_days, self.test_days)

    def model_specs(self) -> list:
        return [
            DeepGbSpec(tuple(self.features), self.boost_config(), self.gbdt_config()),
            BaselineSpec("seasonal_naive", period=self.seasonal_period or None),
            BaselineSpec("linear_ar", order=self.ar_order),
        ]

    def validate(self) -> "RunConfig":
        self.boost_config()
        self.gbdt_config()
        self.split_spec()
        if self.layout not in ("long", "wide"):
            raise ConfigError(f"layout must be 'long' or 'wide', got {self.layout!r}")
        if self.missing_policy not in ("interpolate", "drop_leading"):
            raise ConfigError(f"unknown missing_policy {self.missing_policy!r}")
        if self.max_stages < 0 or self.seasonal_period < 0:
            raise ConfigError("max_stages and seasonal_period must be >= 0")
        return self

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(map(str, v))
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in fields(RunConfig)}
_DEFAULTS = RunConfig()


def _coerce(key: str, text: str):
    default = getattr(_DEFAULTS, key)
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [s.strip() for s in text.split(",") if s.strip()]
            if key == "hidden_sizes":
                return tuple(int(s) for s in items)
            return tuple(items)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {text!r}") from None
    return text


def apply_values(cfg: RunConfig, values: dict, source: str) -> RunConfig:
    for key, text in values.items():
        if key not in _FIELDS:
            raise ConfigError(f"{source}: unknown config key {key!r}")
        setattr(cfg, key, _coerce(key, text))
    return cfg


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return dict(parser["run"])


def env_values(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    return {k[len(ENV_PREFIX):].lower(): v for k, v in environ.items() if k.startswith(ENV_PREFIX)}


def load_config(path=None, environ=None, overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    if path:
        apply_values(cfg, read_config_file(path), str(path))
    apply_values(cfg, env_values(environ), "environment")
    for key, value in (overrides or {}).items():
        if value is not None:
            if key not in _FIELDS:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    return cfg.validate()
