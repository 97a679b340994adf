"""Command-line interface: ``ltsta {fit,forecast,evaluate,benchmark,breaks,simulate}``."""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .config import RunConfig, from_mapping, parse_config_text
from .errors import ConfigError, LtstaError, MissingModel, NumericalError, ParseError
from .io import (read_cif, read_cif_actuals, read_json, read_series_csv, read_values_csv,
                 write_csv, write_json, write_series_csv)
from .metrics import METRICS, MetricSet, aggregate, compute_metrics
from .model import LtstaModel, fit, forecast, resolve_m_max, resolve_transform, summarize
from .selection import select_num_breaks, zero_cost_level
from .series import TimeSeries, apply_transform
from .simulate import SimulationSpec, simulate
from .trend import dp_segment

logger = logging.getLogger("ltsta")

DECOMP_COLUMNS = ["t", "label", "y", "transformed", "trend", "seasonal", "arma_fitted", "residual"]
FORECAST_COLUMNS = ["step", "label", "point", "lower", "upper", "trend", "seasonal", "arma",
                    "variance"]
RESULT_COLUMNS = ["series_id", "horizon", "frequency", "n_train", "m", "breaks", "N", "p", "q",
                  *METRICS, "error"]


# -- configuration -------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    for f in fields(RunConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None,
                       help=f"overrides '{f.name}' (default {f.default!r})")


def _config(args) -> RunConfig:
    mapping = {}
    if getattr(args, "config", None):
        try:
            mapping.update(parse_config_text(Path(args.config).read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            mapping[f.name] = v
    return from_mapping(mapping)


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands ------------------------------------------------------------------

def _selection_payload(model: LtstaModel) -> dict:
    sel = model.selection.to_dict()
    sel["breaks"] = list(model.breaks)
    sel["break_labels"] = [model.series.label(c) for c in model.breaks]
    sel["initial_breaks"] = list(model.stages[0].initial_breaks) if model.stages else []
    return sel


def cmd_fit(args) -> int:
    config = _config(args)
    series = read_series_csv(args.input, config.period)
    model = fit(series, config)
    out = _outdir(args.out)
    write_json(out / "model.json", {"version": __version__, "summary": summarize(model),
                                    "model": model.to_dict()})
    write_csv(out / "decomposition.csv", model.decomposition_rows(), DECOMP_COLUMNS)
    write_json(out / "selection.json", _selection_payload(model))
    write_json(out / "diagnostics.json",
               None if model.diagnostics is None else model.diagnostics.to_dict())
    print(json.dumps({"breaks": [model.series.label(c) for c in model.breaks],
                      "order": [model.arma.p, model.arma.q],
                      "n_harmonics": model.seasonal.n_harmonics}))
    return 0


def _load_model(path) -> LtstaModel:
    try:
        payload = read_json(path)
        return LtstaModel.from_dict(payload["model"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise MissingModel(f"cannot load model from {path}: {exc}") from None


def cmd_forecast(args) -> int:
    model = _load_model(args.model)
    f = int(args.horizon) if args.horizon is not None else model.config.horizon
    level = float(args.level) if args.level is not None else model.config.level
    res = forecast(model, f, level)
    out = _outdir(args.out)
    write_csv(out / "forecast.csv", res.rows(), FORECAST_COLUMNS)
    write_json(out / "forecast.json", {"version": __version__, **res.to_dict()})
    return 0


def cmd_evaluate(args) -> int:
    fc = read_values_csv(args.forecast)
    actual = read_values_csv(args.actual)
    train = read_series_csv(args.train)
    period = int(args.period) if args.period is not None else train.period
    metrics = compute_metrics(fc, actual, train.values, period)
    payload = {"version": __version__, "period": period, **metrics.to_dict()}
    if args.out:
        write_json(args.out, payload)
    print(json.dumps(payload))
    return 0


def cmd_breaks(args) -> int:
    config = _config(args)
    series = read_series_csv(args.input, config.period)
    spec = resolve_transform(series, config)
    y = np.asarray(apply_transform(series.values, spec))
    table = dp_segment(y, resolve_m_max(y.size, config), config.h, config.dp_method)
    curve = table.ssr_curve if config.cost == "ssr" else table.sar_curve(y)
    policy = "manual" if config.m is not None else config.policy
    rep = select_num_breaks(curve, policy, config.m, config.cost,
                            zero_cost_level(y, config.cost))
    payload = rep.to_dict()
    payload["breaks_by_k"] = [list(f.breaks) for f in table.best_by_k]
    payload["breaks"] = list(table.best_by_k[rep.m_selected].breaks)
    payload["break_labels"] = [series.label(c) for c in payload["breaks"]]
    out = _outdir(args.out)
    write_json(out / "selection.json", payload)
    rows = []
    for k, v in enumerate(curve):
        rows.append({"k": k, "cost": float(v),
                     "ratio": rep.ratios[k - 1] if 1 <= k <= len(rep.ratios) else None,
                     "breaks": " ".join(map(str, table.best_by_k[k].breaks))})
    write_csv(out / "selection_curve.csv", rows, ["k", "cost", "ratio", "breaks"])
    print(json.dumps({"m": rep.m_selected, "breaks": payload["break_labels"]}))
    return 0


def cmd_simulate(args) -> int:
    try:
        spec = SimulationSpec.from_dict(read_json(args.spec))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read simulation spec: {exc}") from None
    seed = int(args.seed) if args.seed is not None else 0
    write_series_csv(args.out, simulate(spec, seed))
    return 0


def _natural_key(sid: str):
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", sid)]


def _bench_one(task) -> dict:
    sid, horizon, freq, train, actual, config_dict = task
    row = {"series_id": sid, "horizon": horizon, "frequency": freq, "n_train": len(train)}
    try:
        config = from_mapping({**config_dict, "period": freq, "horizon": horizon})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = fit(TimeSeries(np.asarray(train), freq), config)
        fc = forecast(model, horizon, config.level)
        metrics = compute_metrics(fc.point, actual, train, freq)
        row.update(metrics.to_dict())
        row.update({"m": model.trend.m, "breaks": " ".join(map(str, model.breaks)),
                    "N": model.seasonal.n_harmonics, "p": model.arma.p, "q": model.arma.q})
    except Exception as exc:  # recorded per series; the run continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_benchmark(dataset, config: RunConfig, actuals_path=None) -> dict:
    entries = read_cif(dataset)
    actuals = read_cif_actuals(actuals_path) if actuals_path else None
    tasks, rows = [], []
    cfg = config.to_dict()
    for e in entries:
        if isinstance(e, ParseError):
            rows.append({"series_id": f"line{e.line}", "error": f"ParseError: {e}"})
            continue
        if actuals is not None:
            train = e.values
            actual = actuals.get(e.series_id)
            if actual is None:
                rows.append({"series_id": e.series_id, "error": "no held-out values"})
                continue
        else:
            train, actual = e.values[:-e.horizon], e.values[-e.horizon:]
        tasks.append((e.series_id, e.horizon, e.frequency, train.tolist(),
                      np.asarray(actual).tolist(), cfg))
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            rows.extend(ex.map(_bench_one, tasks))
    else:
        rows.extend(_bench_one(t) for t in tasks)
    rows.sort(key=lambda r: _natural_key(str(r["series_id"])))
    good = [MetricSet(**{k: r[k] for k in METRICS}) for r in rows if not r.get("error")]
    agg = aggregate(good) if good else {}
    return {"rows": rows, "aggregate": agg, "n_series": len(rows),
            "n_errors": sum(1 for r in rows if r.get("error"))}


def cmd_benchmark(args) -> int:
    config = _config(args)
    res = run_benchmark(args.dataset, config, args.actuals)
    out = _outdir(args.out)
    rows = list(res["rows"])
    for stat, vals in res["aggregate"].items():
        rows.append({"series_id": stat, **vals})
    write_csv(out / "results.csv", rows, RESULT_COLUMNS)
    write_json(out / "results.json", {"version": __version__, **res})
    if res["n_errors"]:
        print(f"warning: {res['n_errors']} series failed; see the error column",
              file=sys.stderr)
    print(json.dumps({"n_series": res["n_series"], "n_errors": res["n_errors"],
                      "aggregate": res["aggregate"]}))
    return 0


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ltsta", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model to a series CSV")
    p.add_argument("input")
    p.add_argument("--out", default="out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="forecast from a fitted model.json")
    p.add_argument("model")
    p.add_argument("--horizon", "-f")
    p.add_argument("--level")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("evaluate", help="accuracy metrics for a forecast")
    p.add_argument("--forecast", required=True)
    p.add_argument("--actual", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--period")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="fit/forecast/evaluate every series of a dataset")
    p.add_argument("dataset")
    p.add_argument("--actuals", help="held-out values file (id;v1;...)")
    p.add_argument("--out", default="out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("breaks", help="break-count selection report only")
    p.add_argument("input")
    p.add_argument("--out", default="out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_breaks)

    p = sub.add_parser("simulate", help="draw a synthetic series from a JSON spec")
    p.add_argument("spec")
    p.add_argument("--seed")
    p.add_argument("--out", default="series.csv")
    p.set_defaults(func=cmd_simulate)
    return parser


def _error(exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ParseError) and exc.line is not None:
        payload["line"] = exc.line
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _error(exc, 2)
    except (LtstaError, OSError, ValueError) as exc:
        return _error(exc, 1)


if __name__ == "__main__":
    sys.exit(main())
