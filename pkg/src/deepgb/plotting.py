"""PNG figures written next to the CSV outputs of the CLI."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
}


def _dates(timestamps):
    return np.asarray(timestamps, dtype="datetime64[s]")


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_decomposition(timestamps, y, stage_preds, stage_names, residual, path) -> Path:
    """One panel per stage prediction over the data, plus the residual panel."""
    t = _dates(timestamps)
    n = len(stage_preds) + 1
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(n, 1, figsize=(9, 1.9 * n), sharex=True, squeeze=False)
        axes = axes[:, 0]
        for i, (pred, name) in enumerate(zip(stage_preds, stage_names)):
            ax = axes[i]
            ax.plot(t, y, color="0.7", lw=0.8, label="y")
            ax.plot(t, pred, color="C0", lw=1.0, label=f"stage {i + 1} ({name})")
            ax.legend(loc="upper right", ncol=2)
        ax = axes[-1]
        ax.plot(t, residual, color="C3", lw=0.8)
        ax.axhline(0.0, color="0.5", lw=0.5)
        ax.set_ylabel("residual")
        fig.autofmt_xdate()
        return _save(fig, path)


def plot_forecast(history_t, history_y, future_t, forecast, path, tail: int | None = None) -> Path:
    if tail:
        history_t, history_y = history_t[-tail:], history_y[-tail:]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(9, 3))
        ax.plot(_dates(history_t), history_y, color="0.3", lw=0.8, label="history")
        if len(future_t):
            ax.plot(_dates(future_t), forecast, color="C1", lw=1.2, label="forecast")
        ax.legend(loc="upper left")
        fig.autofmt_xdate()
        return _save(fig, path)


def plot_report(report, path) -> Path:
    """Grouped bars of SMAPE per series and model; failed runs are left out."""
    series = report.series()
    models = report.models()
    width = 0.8 / max(len(models), 1)
    x = np.arange(len(series))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4, 1.6 * len(series) + 2), 3))
        for k, m in enumerate(models):
            vals = []
            for s in series:
                r = report.get(s, m)
                vals.append(np.nan if r is None or r.smape is None else r.smape)
            ax.bar(x + (k - (len(models) - 1) / 2) * width, vals, width, label=m)
        ax.set_xticks(x)
        ax.set_xticklabels(series, rotation=20, ha="right")
        ax.set_ylabel("SMAPE (%)")
        ax.legend()
        return _save(fig, path)
