"""Independent reference implementations shared by the unit and acceptance tests."""

import math

import numpy as np

from deepgb import nn


def random_model(rng, cards=(3, 4), dims=(2, 2), hidden=(5, 3), dropout=0.0, t2v_k=0):
    tables = [nn.EmbeddingTable(f"f{i}", c, rng.normal(size=(c + 1, d))) for i, (c, d) in enumerate(zip(cards, dims))]
    t2v = nn.Time2VecLayer(rng.normal(size=t2v_k), rng.normal(size=t2v_k)) if t2v_k else None
    width = sum(dims) + t2v_k
    head = []
    for h in hidden:
        head.append(nn.DenseLayer(rng.normal(size=(h, width)), rng.normal(size=h), "relu"))
        width = h
    head.append(nn.DenseLayer(rng.normal(size=(1, width)), rng.normal(size=1), "identity"))
    return nn.CompositeEmbeddingModel(tables, head, dropout, t2v)


def random_batch(rng, model, n=7):
    codes = np.column_stack([rng.integers(0, t.rows, n) for t in model.embeddings])
    return codes, rng.uniform(0, 1, n), rng.normal(size=n)


def finite_difference_grads(model, codes, tau, y, h=1e-5, mode="infer", seed=None):
    """Central differences of mean squared error, one scalar at a time."""

    def loss():
        rng = None if seed is None else np.random.default_rng(seed)
        pred, _ = nn.forward(model, codes, tau, mode, rng)
        return float(np.mean((pred - y) ** 2))

    out = {}
    for name, p in model.parameters().items():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = loss()
            flat[i] = old - h
            down = loss()
            flat[i] = old
            gflat[i] = (up - down) / (2 * h)
        out[name] = g
    return out


def analytic_grads(model, codes, tau, y, mode="infer", seed=None):
    rng = None if seed is None else np.random.default_rng(seed)
    pred, cache = nn.forward(model, codes, tau, mode, rng)
    return nn.backward(model, cache, 2 * (pred - y) / len(y))


def max_rel_error(a: dict, b: dict) -> float:
    worst = 0.0
    for k in a:
        num = np.abs(a[k] - b[k])
        den = np.maximum(np.abs(a[k]) + np.abs(b[k]), 1e-7)
        worst = max(worst, float(np.max(num / den)))
    return worst


def sse(v) -> float:
    if len(v) == 0:
        return 0.0
    m = math.fsum(v) / len(v)
    return math.fsum((x - m) ** 2 for x in v)


def brute_force_stump(X, r, min_samples_leaf=1, rtol=1e-9):
    """Every (feature, midpoint) pair scored by direct SSE; ties -> lowest feature, threshold."""
    parent = sse(r)
    scored = []
    for f in range(X.shape[1]):
        vals = sorted(set(X[:, f].tolist()))
        for lo, hi in zip(vals, vals[1:]):
            thr = (lo + hi) / 2
            mask = X[:, f] <= thr
            if mask.sum() < min_samples_leaf or (~mask).sum() < min_samples_leaf:
                continue
            scored.append((parent - sse(r[mask]) - sse(r[~mask]), f, thr))
    if not scored or parent <= 0:
        return None
    best = max(s[0] for s in scored)
    if best <= rtol * parent:
        return None
    gain, f, thr = min((s for s in scored if s[0] >= best - rtol * parent), key=lambda s: (s[1], s[2]))
    mask = X[:, f] <= thr
    return f, thr, math.fsum(r[mask]) / mask.sum(), math.fsum(r[~mask]) / (~mask).sum()


def random_dataset(rng):
    n = int(rng.integers(1, 65))
    k = int(rng.integers(1, 5))
    X = rng.integers(0, rng.integers(1, 10), size=(n, k)).astype(float)
    r = rng.normal(size=n)
    return X, r
