"""Versioned JSON model files.

Floats are written with ``repr`` (Python's shortest round-trip form), so
loading a file gives back bit-identical arrays.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from deepgb import nn
from deepgb.boosting import DeepGbModel, StageRecord
from deepgb.errors import ModelFormatError
from deepgb.gbdt import GbdtModel, RegressionTree
from deepgb.series import Scaler

FORMAT = "deepgb-model"
VERSION = 1


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _floats(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def _layer(layer: nn.DenseLayer) -> dict:
    out, inp = layer.weights.shape
    return {"out": out, "in": inp, "activation": layer.activation,
            "weights": _floats(layer.weights), "bias": _floats(layer.bias)}


def _t2v(layer):
    if layer is None:
        return None
    return {"omega": _floats(layer.omega), "phi": _floats(layer.phi)}


def _tree(tree: RegressionTree) -> dict:
    return {
        "feature": list(map(int, tree.feature)),
        "threshold": list(map(float, tree.threshold)),
        "left": list(map(int, tree.left)),
        "right": list(map(int, tree.right)),
        "value": list(map(float, tree.value)),
    }


def model_to_dict(model: DeepGbModel) -> dict:
    tables = model.composite.embeddings
    return {
        "format": FORMAT,
        "version": VERSION,
        "feature_names": list(model.feature_names),
        "cardinalities": list(map(int, model.cardinalities)),
        "time_ref": list(map(int, model.time_ref)),
        "step": int(model.step),
        "scaler": {"mean": float(model.scaler.mean), "std": float(model.scaler.std)},
        "dropout_rate": float(model.composite.dropout_rate),
        "tables": [
            {"feature": t.feature_name, "cardinality": t.cardinality, "dim": t.dim,
             "frozen": bool(t.frozen), "weights": _floats(t.weights)}
            for t in tables
        ],
        # the last stage's network is the composite used for prediction
        "stages": [
            {
                "index": s.index,
                "feature": s.feature,
                "delta": float(s.delta),
                "stopped": bool(s.stopped),
                "n_tables": len(s.model.embeddings),
                "head": [_layer(layer) for layer in s.model.head],
                "time2vec": _t2v(s.model.time2vec),
                "loss_history": _floats(s.loss_history),
                "prediction": _floats(s.prediction),
                "residual": _floats(s.residual),
            }
            for s in model.stages
        ],
        "residual_model": {
            "base": float(model.residual_model.base),
            "learning_rate": float(model.residual_model.learning_rate),
            "n_features": int(model.residual_model.n_features),
            "trees": [_tree(t) for t in model.residual_model.trees],
        },
    }


def model_from_dict(d: dict) -> DeepGbModel:
    if d.get("format") != FORMAT:
        raise ModelFormatError(f"not a {FORMAT} file")
    if d.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model version {d.get('version')!r}; expected {VERSION}")
    try:
        tables = [
            nn.EmbeddingTable(
                t["feature"], t["cardinality"],
                np.array(t["weights"], dtype=np.float64).reshape(t["cardinality"] + 1, t["dim"]),
                t["frozen"],
            )
            for t in d["tables"]
        ]
        stages = []
        for s in d["stages"]:
            head = [
                nn.DenseLayer(np.array(layer["weights"]).reshape(layer["out"], layer["in"]),
                              np.array(layer["bias"]), layer["activation"])
                for layer in s["head"]
            ]
            t2v = s["time2vec"]
            t2v = None if t2v is None else nn.Time2VecLayer(np.array(t2v["omega"]), np.array(t2v["phi"]))
            net = nn.CompositeEmbeddingModel(tables[: s["n_tables"]], head, d["dropout_rate"], t2v)
            stages.append(StageRecord(
                s["index"], s["feature"], np.array(s["prediction"]), np.array(s["residual"]),
                s["delta"], s["stopped"], net, list(s["loss_history"]),
            ))
        if not stages:
            raise ModelFormatError("model file has no stages")
        rm = d["residual_model"]
        trees = [
            RegressionTree(t["feature"], t["threshold"], t["left"], t["right"], t["value"])
            for t in rm["trees"]
        ]
        residual = GbdtModel(rm["base"], trees, rm["learning_rate"], rm["n_features"])
        return DeepGbModel(
            composite=stages[-1].model,
            residual_model=residual,
            scaler=Scaler(d["scaler"]["mean"], d["scaler"]["std"]),
            stages=stages,
            feature_names=list(d["feature_names"]),
            cardinalities=list(d["cardinalities"]),
            time_ref=tuple(d["time_ref"]),
            step=d["step"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model file: {exc!r}") from exc


def dumps(model: DeepGbModel) -> str:
    return json.dumps(model_to_dict(model), separators=(",", ":")) + "\n"


def save_model(model: DeepGbModel, path) -> None:
    atomic_write_text(path, dumps(model))


def load_model(path) -> DeepGbModel:
    try:
        with Path(path).open() as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(d)
