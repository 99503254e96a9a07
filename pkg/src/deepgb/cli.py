"""Command-line interface: ``deepgb fit|forecast|benchmark|export-plot``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from deepgb.boosting import DeepGbModel, mean_abs
from deepgb.config import RunConfig, load_config
from deepgb.errors import ConfigError, DeepGbError
from deepgb.evaluation import backtest, fit_deepgb_series, forecast_deepgb, render_table, report_csv
from deepgb.serialize import atomic_write_text, load_model, save_model
from deepgb.series import TimeSeries, extract_calendar_features, load_csv

log = logging.getLogger("deepgb")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

MODEL_FILE = "model.json"


def _require_file(path, what: str) -> Path:
    if not path:
        raise ConfigError(f"no {what} given")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} not found: {p}")
    return p


def load_all_series(cfg: RunConfig, path=None) -> list[TimeSeries]:
    p = _require_file(path or cfg.data, "data file")
    return load_csv(p, cfg.layout, cfg.missing_policy)


def pick_series(series: list[TimeSeries], name: str) -> TimeSeries:
    if not name:
        return series[0]
    for s in series:
        if s.name == name:
            return s
    raise ConfigError(f"series {name!r} not in data; available: {[s.name for s in series]}")


def fit_window(ts: TimeSeries, train_days: int) -> TimeSeries:
    """Trailing ``train_days`` window, or the whole series if it is shorter."""
    n = int(round(train_days * ts.points_per_day))
    if n >= len(ts):
        return ts
    return ts.slice(len(ts) - n, len(ts))


def _csv_text(header, rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return out.getvalue()


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_fit(cfg: RunConfig) -> DeepGbModel:
    """Fit on the trailing training window; write the model, stage log and effective config."""
    ts = fit_window(pick_series(load_all_series(cfg), cfg.series), cfg.train_days)
    model = fit_deepgb_series(ts, cfg.features, cfg.boost_config(), cfg.gbdt_config())
    out = Path(cfg.out)
    save_model(model, out / MODEL_FILE)

    rows = []
    for s in model.stages:
        rows.append([s.index, s.feature, repr(s.delta), repr(mean_abs(s.residual)),
                     repr(s.loss_history[-1]), "yes" if s.stopped else "no"])
        print(f"stage {s.index} ({s.feature}): mean|dF| = {s.delta:.6g}, "
              f"mean|F| = {mean_abs(s.residual):.6g}, loss = {s.loss_history[-1]:.6g}"
              + ("  [epsilon reached, stopping]" if s.stopped else ""))
    early = model.stages[-1].stopped and len(model.stages) < len(model.feature_names)
    print(f"early stop: {'yes' if early else 'no'}; {len(model.stages)} stage(s); "
          f"residual trees: {len(model.residual_model.trees)}")
    atomic_write_text(
        out / "stages.csv",
        _csv_text(["stage", "feature", "mean_abs_delta", "mean_abs_residual", "final_loss", "stopped"], rows),
    )
    atomic_write_text(out / "effective_config.ini", cfg.to_text())
    print(f"model written to {out / MODEL_FILE}")
    return model


def cmd_forecast(cfg: RunConfig, model_path, horizon: int) -> np.ndarray:
    """Extend the data series by ``horizon`` steps; writes ``forecast.csv``."""
    if horizon < 0:
        raise ConfigError("horizon must be >= 0")
    model = load_model(_require_file(model_path, "model file"))
    ts = pick_series(load_all_series(cfg), cfg.series)
    if ts.step != model.step:
        raise ConfigError(f"data step {ts.step}s differs from the model's {model.step}s")
    fc = forecast_deepgb(model, ts, horizon)
    future = ts.future_timestamps(horizon)
    out = Path(cfg.out)
    atomic_write_text(
        out / "forecast.csv",
        _csv_text(["timestamp", "forecast"], [[int(t), repr(float(v))] for t, v in zip(future, fc)]),
    )
    if cfg.plots:
        from deepgb.plotting import plot_forecast

        plot_forecast(ts.timestamps, ts.values, future, fc, out / "forecast.png",
                      tail=int(round(7 * ts.points_per_day)))
    print(f"{horizon} forecast rows written to {out / 'forecast.csv'}")
    return fc


def cmd_benchmark(cfg: RunConfig):
    """Backtest deepgb and both baselines on every series in the data file."""
    series = load_all_series(cfg)
    report = backtest(series, cfg.model_specs(), cfg.split_spec())
    out = Path(cfg.out)
    table = render_table(report)
    atomic_write_text(out / "report.csv", report_csv(report))
    atomic_write_text(out / "report.txt", table)
    for r in report.rows:
        if r.error:
            print(f"warning: {r.model} failed on {r.series}: {r.error}", file=sys.stderr)
    if cfg.plots:
        from deepgb.plotting import plot_report

        plot_report(report, out / "report.png")
    print(table, end="")
    return report


def decomposition(model: DeepGbModel, ts: TimeSeries):
    """(header, columns) of the per-stage decomposition on the raw scale."""
    if not model.stages:
        raise DeepGbError("model has no stage records")
    fm = extract_calendar_features(ts, model.feature_names, model.time_ref)
    stage_preds = [model.scaler.inverse(p) for p in model.stage_predictions(fm)]
    residual = ts.values - stage_preds[-1]
    header = ["timestamp", "y"] + [f"stage_{s.index}_pred" for s in model.stages] + ["residual"]
    return header, [ts.timestamps, ts.values, *stage_preds, residual]


def cmd_export_plot(cfg: RunConfig, model_path) -> tuple[list, list]:
    """Write ``decomposition.csv`` (and a matching PNG) for the data series."""
    model = load_model(_require_file(model_path, "model file"))
    ts = pick_series(load_all_series(cfg), cfg.series)
    header, cols = decomposition(model, ts)
    rows = [[int(c[0])] + [repr(float(v)) for v in c[1:]] for c in zip(*cols)]
    out = Path(cfg.out)
    atomic_write_text(out / "decomposition.csv", _csv_text(header, rows))
    if cfg.plots:
        from deepgb.plotting import plot_decomposition

        plot_decomposition(cols[0], cols[1], cols[2:-1], [s.feature for s in model.stages], cols[-1],
                           out / "decomposition.png")
    print(f"decomposition written to {out / 'decomposition.csv'}")
    return header, cols


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--data", help="CSV data file (overrides config 'data')")
    common.add_argument("--out", help="output directory (overrides config 'out')")
    common.add_argument("--seed", type=int, help="random seed (overrides config 'seed')")
    common.add_argument("--no-plot", action="store_true", help="skip PNG figures")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = _Parser(prog="deepgb", description="Boosted-embedding time-series forecasting.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("fit", parents=[common], help="fit a model on the trailing training window")
    f = sub.add_parser("forecast", parents=[common], help="forecast beyond the end of the data")
    f.add_argument("--model", required=True, help="model.json written by fit")
    f.add_argument("--horizon", type=int, required=True, help="number of steps past the end of the data")
    sub.add_parser("benchmark", parents=[common], help="backtest deepgb against baselines")
    e = sub.add_parser("export-plot", parents=[common], help="export the per-stage decomposition")
    e.add_argument("--model", required=True, help="model.json written by fit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {"data": args.data, "out": args.out, "seed": args.seed}
        if args.no_plot:
            overrides["plots"] = False
        cfg = load_config(args.config, overrides=overrides)
        if args.command == "fit":
            cmd_fit(cfg)
        elif args.command == "forecast":
            cmd_forecast(cfg, args.model, args.horizon)
        elif args.command == "benchmark":
            cmd_benchmark(cfg)
        elif args.command == "export-plot":
            cmd_export_plot(cfg, args.model)
    except ConfigError as exc:
        print(f"deepgb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DeepGbError, ValueError, OSError) as exc:
        print(f"deepgb: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
