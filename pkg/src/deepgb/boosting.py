"""Boosting drivers.

:func:`gradient_boost` is the generic residual-fitting loop over an ordered
list of models. :func:`deepgb_fit` trains one embedding per calendar feature,
freezing each table once its stage is done, then fits a tree ensemble on
whatever the final network leaves unexplained.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from deepgb import nn
from deepgb.errors import ConfigError, ShapeError
from deepgb.gbdt import GbdtConfig, GbdtModel, gbdt_fit, gbdt_predict
from deepgb.series import FeatureMatrix, Scaler, TimeSeries, standardize

log = logging.getLogger(__name__)


@dataclass
class BoostConfig:
    epsilon: float = 1e-3
    max_stages: int | None = None  # None: one stage per feature
    rho: float = 1.0
    train: nn.TrainConfig = field(default_factory=nn.TrainConfig)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
        if self.rho <= 0:
            raise ConfigError("rho must be > 0")
        if self.max_stages is not None and self.max_stages < 1:
            raise ConfigError("max_stages must be >= 1")


def mean_abs(a) -> float:
    return float(np.mean(np.abs(a)))


def gradient_boost(x, y, models, config: BoostConfig | None = None, on_stage=None) -> list:
    """Fit ``models`` in order, each on the residual left by the previous ones.

    Each model needs ``fit(x, target)`` and ``predict(x)``. The loop stops
    when a stage changes the residual by less than ``epsilon`` in mean
    absolute value; that stage's model is not kept. Combine the returned
    models with :func:`boosted_predict`.

    ``on_stage(m, residual, delta)`` is called after every stage, including
    the one that triggers termination.
    """
    config = config or BoostConfig()
    models = list(models)
    if not models:
        raise ConfigError("gradient_boost needs at least one model")
    fitted = []
    F_prev = np.asarray(y, dtype=np.float64)
    for m, model in enumerate(models, start=1):
        model.fit(x, F_prev)
        F = F_prev - config.rho * np.asarray(model.predict(x), dtype=np.float64)
        delta = mean_abs(F - F_prev)
        if on_stage is not None:
            on_stage(m, F, delta)
        if delta < config.epsilon:
            break
        fitted.append(model)
        F_prev = F
    return fitted


def boosted_predict(models, x, rho: float = 1.0) -> np.ndarray:
    out = None
    for m in models:
        p = rho * np.asarray(m.predict(x), dtype=np.float64)
        out = p if out is None else out + p
    if out is None:
        raise ConfigError("no fitted models")
    return out


@dataclass
class StageRecord:
    """Outcome of one embedding stage, on the standardized training scale.

    ``model`` is the network trained in this stage; its tables are shared
    with (and frozen in) every later stage.
    """

    index: int
    feature: str
    prediction: np.ndarray
    residual: np.ndarray
    delta: float
    stopped: bool
    model: nn.CompositeEmbeddingModel
    loss_history: list = field(default_factory=list)


@dataclass
class DeepGbModel:
    composite: nn.CompositeEmbeddingModel
    residual_model: GbdtModel
    scaler: Scaler
    stages: list
    feature_names: list
    cardinalities: list
    time_ref: tuple
    step: int

    def check_features(self, fm: FeatureMatrix) -> None:
        for i, (name, card) in enumerate(zip(self.feature_names, self.cardinalities)):
            if i >= len(fm.features):
                raise ShapeError(f"feature {name!r} missing from input")
            f = fm.features[i]
            if f.name != name or f.cardinality != card:
                raise ShapeError(
                    f"feature {name!r} (cardinality {card}) does not match input "
                    f"{f.name!r} (cardinality {f.cardinality})"
                )
        if len(fm.features) != len(self.feature_names):
            raise ShapeError(f"expected features {self.feature_names}, got {fm.names}")

    def predict_parts(self, fm: FeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
        """(network, tree-ensemble) predictions on the standardized scale."""
        self.check_features(fm)
        codes = fm.codes()
        return (
            self.composite.predict(codes, fm.time_index),
            gbdt_predict(self.residual_model, codes),
        )

    def stage_predictions(self, fm: FeatureMatrix) -> list[np.ndarray]:
        self.check_features(fm)
        codes = fm.codes()
        return [s.model.predict(codes, fm.time_index) for s in self.stages]

    def predict(self, fm: FeatureMatrix) -> np.ndarray:
        return deepgb_predict(self, fm)


def stage_seed(seed: int, stage: int) -> int:
    return int(np.random.SeedSequence([seed, stage]).generate_state(1)[0])


def deepgb_fit(
    ts: TimeSeries,
    fm: FeatureMatrix,
    config: BoostConfig | None = None,
    residual_spec: GbdtConfig | None = None,
    on_stage=None,
) -> DeepGbModel:
    """Staged embedding training with freezing, then a residual tree ensemble.

    Stage ``m`` builds a network over the ``m - 1`` frozen tables plus a new
    table for feature ``m`` and a fresh dense head, fits it to the
    standardized target, and freezes the new table. Because that network
    already carries every earlier embedding, the working residual is
    ``y - prediction_m``. Training stops early once the residual moves by
    less than ``epsilon`` (mean absolute change) or its mean absolute value
    drops below ``epsilon``. The tree ensemble is then fit on the final
    residual using the categorical codes as inputs.

    ``on_stage``, if given, is called with each :class:`StageRecord` as soon
    as the stage finishes.
    """
    config = config or BoostConfig()
    residual_spec = residual_spec or GbdtConfig()
    if len(fm) != len(ts):
        raise ShapeError(f"{len(fm)} feature rows for a series of length {len(ts)}")
    if not fm.features:
        raise ConfigError("deepgb_fit needs at least one feature")
    n_stages = config.max_stages or len(fm.features)
    if n_stages > len(fm.features):
        raise ConfigError(f"max_stages={n_stages} exceeds the {len(fm.features)} available features")

    scaler, z = standardize(ts.values)
    codes = fm.codes()
    tidx = fm.time_index
    train = config.train

    tables: list = []
    stages: list[StageRecord] = []
    F_prev = z
    for m in range(n_stages):
        feat = fm.features[m]
        seed = stage_seed(train.seed, m)
        rng = np.random.default_rng(seed)
        model = nn.build_composite(tables, feat.name, feat.cardinality, train, rng)
        model, history = nn.fit(model, codes[:, : m + 1], z, replace(train, seed=seed), tidx)
        nn.freeze_embedding(model, m)
        pred = model.predict(codes, tidx)
        F = z - pred
        delta = mean_abs(F - F_prev)
        stop = delta < config.epsilon or mean_abs(F) < config.epsilon
        stages.append(StageRecord(m + 1, feat.name, pred, F, delta, stop, model, history))
        log.info(
            "stage %d (%s): loss %.6g, mean|dF| %.6g, mean|F| %.6g%s",
            m + 1, feat.name, history[-1], delta, mean_abs(F), " -> stop" if stop else "",
        )
        if on_stage is not None:
            on_stage(stages[-1])
        tables = model.embeddings
        F_prev = F
        if stop:
            break

    residual_model = gbdt_fit(codes, F_prev, residual_spec)
    return DeepGbModel(
        composite=stages[-1].model,
        residual_model=residual_model,
        scaler=scaler,
        stages=stages,
        feature_names=fm.names,
        cardinalities=fm.cardinalities,
        time_ref=(int(ts.timestamps[0]), int(ts.timestamps[-1])),
        step=ts.step,
    )


def deepgb_predict(model: DeepGbModel, fm: FeatureMatrix) -> np.ndarray:
    """Raw-scale forecast: inverse-scaled sum of network and tree predictions."""
    net, trees = model.predict_parts(fm)
    return model.scaler.inverse(net + trees)


def snapshot_tables(model: nn.CompositeEmbeddingModel) -> list[np.ndarray]:
    return [t.weights.copy() for t in model.embeddings]
