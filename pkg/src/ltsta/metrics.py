"""Forecast accuracy measures and simple benchmark forecasts."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from .errors import LengthMismatch, SeriesTooShort, ValidationError, ZeroDenominator

METRICS = ("mae", "rmse", "smape_percent", "mase")


@dataclass(frozen=True)
class MetricSet:
    mae: float
    rmse: float
    smape_percent: float
    mase: float

    def to_dict(self) -> dict:
        return asdict(self)


def _pair(forecast, actual):
    fc = np.asarray(forecast, dtype=float).ravel()
    ac = np.asarray(actual, dtype=float).ravel()
    if fc.size != ac.size:
        raise LengthMismatch(f"forecast has {fc.size} values, actual has {ac.size}")
    if fc.size == 0:
        raise SeriesTooShort("need at least one forecast")
    return fc, ac


def smape(forecast, actual) -> float:
    """Symmetric MAPE in percent; terms with ``|f| + |y| = 0`` count as 0."""
    fc, ac = _pair(forecast, actual)
    den = np.abs(fc) + np.abs(ac)
    num = 2.0 * np.abs(fc - ac)
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return 100.0 * float(terms.mean())


def seasonal_naive_mae(train, period: int) -> float:
    y = np.asarray(train, dtype=float).ravel()
    if y.size <= period:
        raise SeriesTooShort(f"training series needs more than {period} values")
    return float(np.mean(np.abs(y[period:] - y[:-period])))


def compute_metrics(forecast, actual, train, period: int) -> MetricSet:
    fc, ac = _pair(forecast, actual)
    err = fc - ac
    scale = seasonal_naive_mae(train, max(int(period), 1))
    if scale == 0.0:
        raise ZeroDenominator("training series is exactly periodic; MASE undefined")
    abs_err = np.abs(err)
    mae = float(np.mean(abs_err))
    # scaled so tiny or huge errors neither underflow nor overflow when squared
    top = float(abs_err.max())
    rmse = top * float(np.sqrt(np.mean((abs_err / top) ** 2))) if top > 0 else 0.0
    return MetricSet(mae, rmse, smape(fc, ac), mae / scale)


def aggregate(metrics: Sequence[MetricSet]) -> Dict[str, Dict[str, float]]:
    """Mean and median of every metric across series."""
    if not metrics:
        raise ValidationError("nothing to aggregate")
    out = {}
    for stat, fn in (("mean", np.mean), ("median", np.median)):
        out[stat] = {k: float(fn([getattr(m, k) for m in metrics])) for k in METRICS}
    return out


def _ses_path(y: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    """One-step fitted values (level starts at y[0]) and the final level."""
    level = y[0]
    fitted = np.empty(y.size)
    for i, v in enumerate(y):
        fitted[i] = level
        level = alpha * v + (1.0 - alpha) * level
    return fitted, level


def ses_alpha(train) -> float:
    """Grid search over ``0.01..0.99`` minimizing one-step squared errors."""
    y = np.asarray(train, dtype=float)
    grid = np.round(np.arange(1, 100) / 100.0, 2)
    sse = [float(np.sum((y[1:] - _ses_path(y, a)[0][1:]) ** 2)) for a in grid]
    return float(grid[int(np.argmin(sse))])


def baseline_forecast(train, method: str, f: int, period: int = 1,
                      alpha: Optional[float] = None) -> np.ndarray:
    y = np.asarray(train, dtype=float).ravel()
    if y.size == 0:
        raise SeriesTooShort("training series is empty")
    if f < 1:
        raise ValidationError("horizon must be at least 1")
    if method == "naive":
        return np.full(f, y[-1])
    if method == "seasonal_naive":
        if y.size < period:
            raise SeriesTooShort(f"seasonal naive needs at least {period} values")
        cycle = y[-period:]
        return np.resize(cycle, f)
    if method == "ses":
        if alpha is None:
            alpha = ses_alpha(y) if y.size > 1 else 1.0
        if not 0.0 < alpha <= 1.0:
            raise ValidationError("alpha must lie in (0, 1]")
        return np.full(f, _ses_path(y, alpha)[1])
    raise ValidationError(f"unknown baseline {method!r}")
