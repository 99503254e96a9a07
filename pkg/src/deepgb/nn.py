"""Small numpy network: embedding tables, concatenation, dense ReLU head.

Backpropagation is written out by hand for this one architecture. Tables can
be frozen individually; a frozen table is never handed to the optimiser, so
its weights stay bit-identical for the rest of the model's life.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from deepgb.errors import ConfigError, ShapeError, TrainingError


def embedding_size(cardinality: int, rule: str = "half") -> int:
    """Embedding width for a categorical feature with ``cardinality`` levels.

    ``half`` is ``min(50, (c + 1) // 2)``; ``fourth_root`` is
    ``round((c + 1) ** 0.25)``. Both are clamped to at least 1.
    """
    if cardinality < 1:
        raise ConfigError(f"cardinality must be >= 1, got {cardinality}")
    if rule == "half":
        size = min(50, (cardinality + 1) // 2)
    elif rule == "fourth_root":
        size = round((cardinality + 1) ** 0.25)
    else:
        raise ConfigError(f"unknown embedding size rule {rule!r}")
    return max(1, int(size))


@dataclass
class EmbeddingTable:
    feature_name: str
    cardinality: int
    weights: np.ndarray  # (cardinality + 1, dim)
    frozen: bool = False

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[0] != self.cardinality + 1:
            raise ShapeError(
                f"table {self.feature_name!r}: expected {self.cardinality + 1} rows, "
                f"got shape {self.weights.shape}"
            )

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.activation not in ("relu", "identity"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(f"bias shape {self.bias.shape} does not match weights {self.weights.shape}")


@dataclass
class Time2VecLayer:
    """One linear and ``k - 1`` sinusoidal components of a scalar time input."""

    omega: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=np.float64)
        self.phi = np.asarray(self.phi, dtype=np.float64)
        if self.omega.ndim != 1 or self.omega.shape != self.phi.shape or len(self.omega) < 1:
            raise ShapeError("time2vec omega and phi must be equal-length non-empty vectors")

    @property
    def k(self) -> int:
        return len(self.omega)


def time2vec(tau, layer: Time2VecLayer) -> np.ndarray:
    """Evaluate the layer at scalar ``tau`` (or a vector of them, giving rows)."""
    tau = np.asarray(tau, dtype=np.float64)
    lin = np.multiply.outer(tau, layer.omega) + layer.phi
    out = np.sin(lin)
    out[..., 0] = lin[..., 0]
    return out


@dataclass
class CompositeEmbeddingModel:
    embeddings: list
    head: list
    dropout_rate: float = 0.1
    time2vec: Time2VecLayer | None = None

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if not self.head or self.head[-1].weights.shape[0] != 1:
            raise ShapeError("the final dense layer must have a single output")
        width = self.input_width
        for layer in self.head:
            if layer.weights.shape[1] != width:
                raise ShapeError(f"dense layer expects {layer.weights.shape[1]} inputs, gets {width}")
            width = layer.weights.shape[0]

    @property
    def input_width(self) -> int:
        width = sum(t.dim for t in self.embeddings)
        if self.time2vec is not None:
            width += self.time2vec.k
        return width

    @property
    def feature_names(self) -> list[str]:
        return [t.feature_name for t in self.embeddings]

    def parameters(self, trainable_only: bool = True) -> dict:
        """Name -> array views of (trainable) parameters, in a fixed order."""
        params = {}
        for i, t in enumerate(self.embeddings):
            if not (trainable_only and t.frozen):
                params[f"emb{i}"] = t.weights
        if self.time2vec is not None:
            params["t2v_omega"] = self.time2vec.omega
            params["t2v_phi"] = self.time2vec.phi
        for j, layer in enumerate(self.head):
            params[f"dense{j}_w"] = layer.weights
            params[f"dense{j}_b"] = layer.bias
        return params

    def n_parameters(self, trainable_only: bool = False) -> int:
        return sum(p.size for p in self.parameters(trainable_only).values())

    def predict(self, codes, time_index=None) -> np.ndarray:
        return forward(self, codes, time_index, mode="infer")[0]


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    dropout_rate: float = 0.1
    hidden_sizes: tuple = (32, 32, 32, 32)
    learning_rate: float = 0.0002
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-8
    embedding_rule: str = "half"
    window_size: int = 1  # accepted for parity with windowed inputs; only the last step is read
    time2vec: bool = False
    time2vec_k: int = 4

    def __post_init__(self):
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if any(h < 1 for h in self.hidden_sizes):
            raise ConfigError("hidden sizes must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.window_size < 1:
            raise ConfigError("window_size must be >= 1")
        if self.time2vec and self.time2vec_k < 1:
            raise ConfigError("time2vec_k must be >= 1")
        embedding_size(1, self.embedding_rule)  # validates the rule name


@dataclass
class RmsPropState:
    learning_rate: float = 0.0002
    decay: float = 0.9
    epsilon: float = 1e-8
    accumulators: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def new_table(name: str, cardinality: int, rule: str, rng: np.random.Generator) -> EmbeddingTable:
    dim = embedding_size(cardinality, rule)
    rows = cardinality + 1
    return EmbeddingTable(name, cardinality, xavier_uniform(rng, rows, dim, (rows, dim)))


def new_head(in_width: int, hidden_sizes, rng: np.random.Generator) -> list[DenseLayer]:
    """ReLU hidden layers plus a zero-initialised linear output unit.

    A zero output layer makes the untrained network predict exactly 0, which
    is the optimum for a standardised target with no signal.
    """
    layers = []
    width = in_width
    for h in hidden_sizes:
        layers.append(DenseLayer(xavier_uniform(rng, width, h, (h, width)), np.zeros(h), "relu"))
        width = h
    layers.append(DenseLayer(np.zeros((1, width)), np.zeros(1), "identity"))
    return layers


def build_composite(
    frozen_tables: list,
    feature_name: str,
    cardinality: int,
    config: TrainConfig,
    rng: np.random.Generator,
) -> CompositeEmbeddingModel:
    """Previously frozen tables plus one new trainable table and a fresh head."""
    table = new_table(feature_name, cardinality, config.embedding_rule, rng)
    tables = list(frozen_tables) + [table]
    t2v = None
    if config.time2vec:
        t2v = Time2VecLayer(rng.uniform(-1, 1, config.time2vec_k), rng.uniform(-1, 1, config.time2vec_k))
    width = sum(t.dim for t in tables) + (t2v.k if t2v is not None else 0)
    head = new_head(width, config.hidden_sizes, rng)
    return CompositeEmbeddingModel(tables, head, config.dropout_rate, t2v)


def freeze_embedding(model: CompositeEmbeddingModel, index: int) -> CompositeEmbeddingModel:
    if not -len(model.embeddings) <= index < len(model.embeddings):
        raise IndexError(f"embedding index {index} out of range for {len(model.embeddings)} tables")
    model.embeddings[index].frozen = True
    return model


# --------------------------------------------------------------------------
# forward / backward
# --------------------------------------------------------------------------


def forward(model: CompositeEmbeddingModel, codes, time_index=None, mode: str = "infer", rng=None):
    """Predictions for each row of ``codes`` and the cache needed by :func:`backward`.

    Column ``i`` of ``codes`` feeds embedding table ``i``; extra columns are
    ignored. ``rng`` draws the dropout mask in train mode.
    """
    codes = np.asarray(codes)
    if codes.ndim == 1:
        codes = codes[:, None]
    n = codes.shape[0]
    if codes.shape[1] < len(model.embeddings):
        raise ShapeError(f"model has {len(model.embeddings)} embeddings, input has {codes.shape[1]} columns")

    parts = []
    for i, table in enumerate(model.embeddings):
        c = codes[:, i]
        bad = np.flatnonzero((c < 0) | (c >= table.rows))
        if bad.size:
            r = int(bad[0])
            raise ShapeError(
                f"feature {table.feature_name!r}: code {int(c[r])} at row {r} outside [0, {table.rows})"
            )
        parts.append(table.weights[c])
    tau = None
    if model.time2vec is not None:
        if time_index is None:
            raise ShapeError("model uses time2vec but no time index was given")
        tau = np.asarray(time_index, dtype=np.float64)
        parts.append(time2vec(tau, model.time2vec))
    h = np.concatenate(parts, axis=1) if parts else np.zeros((n, 0))

    train = mode == "train"
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    inputs, pre, masks = [], [], []
    for j, layer in enumerate(model.head):
        inputs.append(h)
        z = h @ layer.weights.T + layer.bias
        pre.append(z)
        h = np.maximum(z, 0.0) if layer.activation == "relu" else z
        mask = None
        if train and j == 0 and model.dropout_rate > 0 and len(model.head) > 1:
            if rng is None:
                raise ValueError("train mode with dropout needs an rng")
            keep = 1.0 - model.dropout_rate
            mask = (rng.random(h.shape) < keep) / keep
            h = h * mask
        masks.append(mask)
    cache = {"codes": codes, "tau": tau, "inputs": inputs, "pre": pre, "masks": masks}
    return h[:, 0], cache


def backward(model: CompositeEmbeddingModel, cache: dict, grad_pred) -> dict:
    """Gradients of the loss for every trainable parameter.

    ``grad_pred`` is dLoss/dPrediction per row (for mean squared error,
    ``2 * (pred - y) / n``). Frozen tables get no entry.
    """
    g = np.asarray(grad_pred, dtype=np.float64).reshape(-1, 1)
    grads = {}
    for j in range(len(model.head) - 1, -1, -1):
        layer = model.head[j]
        if cache["masks"][j] is not None:
            g = g * cache["masks"][j]
        if layer.activation == "relu":
            g = g * (cache["pre"][j] > 0)
        grads[f"dense{j}_w"] = g.T @ cache["inputs"][j]
        grads[f"dense{j}_b"] = g.sum(axis=0)
        g = g @ layer.weights

    offset = 0
    codes = cache["codes"]
    for i, table in enumerate(model.embeddings):
        block = g[:, offset : offset + table.dim]
        offset += table.dim
        if table.frozen:
            continue
        gw = np.zeros_like(table.weights)
        np.add.at(gw, codes[:, i], block)
        grads[f"emb{i}"] = gw
    if model.time2vec is not None:
        t2v = model.time2vec
        gt = g[:, offset : offset + t2v.k]
        tau = cache["tau"]
        lin = np.multiply.outer(tau, t2v.omega) + t2v.phi
        dlin = np.cos(lin)
        dlin[:, 0] = 1.0
        gl = gt * dlin
        grads["t2v_omega"] = (gl * tau[:, None]).sum(axis=0)
        grads["t2v_phi"] = gl.sum(axis=0)
    return grads


def mse(pred, target) -> float:
    d = np.asarray(pred) - np.asarray(target)
    return float(np.mean(d * d))


def rmsprop_step(params: dict, grads: dict, state: RmsPropState):
    """In-place RMSProp update of every parameter that has a gradient.

    ``acc <- decay * acc + (1 - decay) * g**2`` then
    ``p <- p - lr * g / (sqrt(acc) + eps)``.
    """
    for name, g in grads.items():
        p = params[name]
        if p.shape != g.shape:
            raise ShapeError(f"{name}: parameter shape {p.shape} vs gradient {g.shape}")
        acc = state.accumulators.get(name)
        if acc is None:
            acc = state.accumulators[name] = np.zeros_like(p)
        acc *= state.decay
        acc += (1.0 - state.decay) * g * g
        p -= state.learning_rate * g / (np.sqrt(acc) + state.epsilon)
    return params, state


def fit(model: CompositeEmbeddingModel, codes, target, config: TrainConfig, time_index=None):
    """Mini-batch RMSProp on mean squared error.

    Returns the (in-place trained) model and the full-data loss after each
    epoch.
    """
    codes = np.asarray(codes)
    if codes.ndim == 1:
        codes = codes[:, None]
    y = np.asarray(target, dtype=np.float64)
    n = len(y)
    if codes.shape[0] != n:
        raise ShapeError(f"{codes.shape[0]} feature rows for {n} targets")
    tau = None if time_index is None else np.asarray(time_index, dtype=np.float64)
    rng = np.random.default_rng(config.seed)
    state = RmsPropState(config.learning_rate, config.rmsprop_decay, config.rmsprop_epsilon)
    params = model.parameters(trainable_only=True)

    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            pred, cache = forward(model, codes[idx], None if tau is None else tau[idx], "train", rng)
            grads = backward(model, cache, 2.0 * (pred - y[idx]) / len(idx))
            rmsprop_step(params, grads, state)
        loss = mse(model.predict(codes, tau), y)
        if not math.isfinite(loss):
            raise TrainingError(
                f"training diverged at epoch {epoch + 1} (loss={loss}); try a smaller learning rate"
            )
        history.append(loss)
    return model, history
