"""Gradient boosting of categorical embedding networks for time-series forecasting."""

from deepgb.boosting import (
    BoostConfig,
    DeepGbModel,
    StageRecord,
    deepgb_fit,
    deepgb_predict,
    gradient_boost,
)
from deepgb.errors import DeepGbError
from deepgb.gbdt import GbdtConfig, GbdtModel, gbdt_fit, gbdt_predict
from deepgb.nn import CompositeEmbeddingModel, TrainConfig
from deepgb.series import (
    FeatureMatrix,
    SplitSpec,
    TimeSeries,
    extract_calendar_features,
    load_csv,
    standardize,
    train_test_split,
)

__version__ = "0.1.0"

__all__ = [
    "BoostConfig",
    "CompositeEmbeddingModel",
    "DeepGbError",
    "DeepGbModel",
    "FeatureMatrix",
    "GbdtConfig",
    "GbdtModel",
    "SplitSpec",
    "StageRecord",
    "TimeSeries",
    "TrainConfig",
    "deepgb_fit",
    "deepgb_predict",
    "extract_calendar_features",
    "gbdt_fit",
    "gbdt_predict",
    "gradient_boost",
    "load_csv",
    "standardize",
    "train_test_split",
]
