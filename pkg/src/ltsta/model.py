"""Trend, seasonal and ARMA decomposition fitted in four stages."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import stats

from .arma import (ArmaFit, RegArmaFit, fit_reg_arma, forecast_arma, hessian_covariance,
                   select_orders)
from .config import RunConfig
from .errors import DegenerateVariance, TooFewResiduals, ValidationError
from .seasonal import SeasonalFit, fourier_basis, fourier_columns, fourier_design
from .selection import SelectionReport, default_m_max, select_num_breaks, zero_cost_level
from .series import TimeSeries, TransformSpec, apply_transform, invert_transform, suggest_transform
from .trend import Segmentation, TrendFit, build_design_matrix, dp_segment, hinge_basis

logger = logging.getLogger(__name__)


class BreaksNearEndpoint(UserWarning):
    """A fitted break leaves at most ``h`` observations in the final regime."""


# -- diagnostics -------------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticsReport:
    ljung_box_q: float
    ljung_box_p: float
    jarque_bera: float
    jarque_bera_p: float
    het_h: float
    het_p: float
    skew: float
    kurtosis: float
    nobs: int

    def to_dict(self) -> dict:
        return {
            "ljung_box_l1": {"q": self.ljung_box_q, "p": self.ljung_box_p},
            "jarque_bera": {"jb": self.jarque_bera, "p": self.jarque_bera_p},
            "heteroskedasticity_h": {"h": self.het_h, "p": self.het_p},
            "skew": self.skew,
            "kurtosis": self.kurtosis,
            "nobs": self.nobs,
        }


def diagnose(residuals) -> DiagnosticsReport:
    """Lag-1 Ljung-Box, Jarque-Bera and a thirds-ratio heteroskedasticity test.

    ``kurtosis`` is the raw (non-excess) fourth standardized moment.
    """
    e = np.asarray(residuals, dtype=float).ravel()
    n = e.size
    if n < 8:
        raise TooFewResiduals(f"need at least 8 residuals, got {n}")
    d = e - e.mean()
    m2 = float(d @ d) / n
    if m2 > 0:
        r1 = float(d[1:] @ d[:-1]) / (n * m2)
        skew = float(np.mean(d ** 3)) / m2 ** 1.5
        kurt = float(np.mean(d ** 4)) / m2 ** 2
    else:
        r1, skew, kurt = 0.0, 0.0, 3.0
    q = n * (n + 2) * r1 * r1 / (n - 1)
    jb = n / 6.0 * (skew ** 2 + (kurt - 3.0) ** 2 / 4.0)

    k = int(np.round(n / 3.0))
    num = float(e[n - k:] @ e[n - k:])
    den = float(e[:k] @ e[:k])
    if den > 0:
        H = num / den
        p_h = float(min(1.0, 2.0 * min(stats.f.cdf(H, k, k), stats.f.sf(H, k, k))))
    else:
        H, p_h = (np.inf if num > 0 else 1.0), (0.0 if num > 0 else 1.0)
    return DiagnosticsReport(float(q), float(stats.chi2.sf(q, 1)), float(jb),
                             float(stats.chi2.sf(jb, 2)), float(H), p_h, skew, kurt, n)


# -- model ---------------------------------------------------------------------

@dataclass(frozen=True)
class StageRecord:
    """Intermediate output of one pass of the estimation scheme."""

    initial_breaks: tuple
    refined_breaks: tuple
    n_harmonics: int
    p: int
    q: int
    order_table: List[dict] = field(default_factory=list)


@dataclass(frozen=True)
class LtstaModel:
    series: TimeSeries
    transform: TransformSpec
    y: np.ndarray                   # transformed observations
    trend: TrendFit
    seasonal: SeasonalFit
    arma: ArmaFit
    coef: np.ndarray                # [trend | Fourier] regression coefficients
    residuals: np.ndarray           # one-step innovations
    arma_fitted: np.ndarray
    prediction_var: np.ndarray
    state: np.ndarray
    selection: SelectionReport
    diagnostics: Optional[DiagnosticsReport]
    config: RunConfig
    stages: List[StageRecord] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def breaks(self) -> tuple:
        return self.trend.breaks

    @property
    def period(self) -> int:
        return self.seasonal.period

    def design(self, t=None) -> np.ndarray:
        t = np.arange(1, self.n + 1) if t is None else np.asarray(t)
        X = hinge_basis(t, self.breaks)
        if self.seasonal.n_harmonics:
            X = np.column_stack([X, fourier_basis(t, self.period, self.seasonal.n_harmonics)])
        return X

    def components(self) -> dict:
        t = np.arange(1, self.n + 1)
        return {
            "trend": self.trend.values(t),
            "seasonal": self.seasonal.values(t),
            "arma_fitted": self.arma_fitted.copy(),
            "residual": self.residuals.copy(),
        }

    def decomposition_rows(self) -> List[dict]:
        comp = self.components()
        rows = []
        for i in range(self.n):
            rows.append({
                "t": i + 1, "label": self.series.label(i + 1),
                "y": float(self.series.values[i]), "transformed": float(self.y[i]),
                "trend": float(comp["trend"][i]), "seasonal": float(comp["seasonal"][i]),
                "arma_fitted": float(comp["arma_fitted"][i]),
                "residual": float(comp["residual"][i]),
            })
        return rows

    @property
    def std_residuals(self) -> np.ndarray:
        return self.residuals / np.sqrt(self.arma.sigma2 * self.prediction_var)

    def to_dict(self) -> dict:
        return {
            "series": {"values": self.series.values.tolist(), "period": self.series.period,
                       "start_label": self.series.start_label},
            "transform": self.transform.to_dict(),
            "trend": self.trend.to_dict(),
            "seasonal": self.seasonal.to_dict(),
            "arma": self.arma.to_dict(),
            "coef": self.coef.tolist(),
            "residuals": self.residuals.tolist(),
            "arma_fitted": self.arma_fitted.tolist(),
            "prediction_var": self.prediction_var.tolist(),
            "state": self.state.tolist(),
            "selection": self.selection.to_dict(),
            "diagnostics": None if self.diagnostics is None else self.diagnostics.to_dict(),
            "config": self.config.to_dict(),
            "stages": [vars(s) | {"initial_breaks": list(s.initial_breaks),
                                  "refined_breaks": list(s.refined_breaks)}
                       for s in self.stages],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LtstaModel":
        from .config import from_mapping

        s = d["series"]
        series = TimeSeries(np.array(s["values"]), s["period"], s.get("start_label"))
        spec = TransformSpec.from_dict(d["transform"])
        diag = d.get("diagnostics")
        diagnostics = None if diag is None else DiagnosticsReport(
            diag["ljung_box_l1"]["q"], diag["ljung_box_l1"]["p"],
            diag["jarque_bera"]["jb"], diag["jarque_bera"]["p"],
            diag["heteroskedasticity_h"]["h"], diag["heteroskedasticity_h"]["p"],
            diag["skew"], diag["kurtosis"], diag["nobs"])
        stages = [StageRecord(tuple(r["initial_breaks"]), tuple(r["refined_breaks"]),
                              r["n_harmonics"], r["p"], r["q"], r.get("order_table", []))
                  for r in d.get("stages", [])]
        return cls(series, spec, np.asarray(apply_transform(series.values, spec)),
                   TrendFit.from_dict(d["trend"]), SeasonalFit.from_dict(d["seasonal"]),
                   ArmaFit.from_dict(d["arma"]), np.array(d["coef"]),
                   np.array(d["residuals"]), np.array(d["arma_fitted"]),
                   np.array(d["prediction_var"]), np.array(d["state"]),
                   SelectionReport(**d["selection"]), diagnostics,
                   from_mapping(d["config"]), stages)


def resolve_transform(series: TimeSeries, config: RunConfig) -> TransformSpec:
    if config.transform == "auto":
        return suggest_transform(series.values)
    return TransformSpec(config.transform, config.lam)


def resolve_m_max(n: int, config: RunConfig) -> int:
    h = config.h
    feasible = min(n // h - 1, n - 2)
    m_max = default_m_max(n) if config.m_max == "auto" else int(config.m_max)
    if config.m is not None:
        m_max = max(m_max, config.m)
    if config.m_max == "auto":
        m_max = min(m_max, feasible)
    if m_max < 1 or m_max > feasible:
        raise ValidationError(f"n={n} with h={h} allows at most {feasible} breaks, asked {m_max}")
    return m_max


def _check_endpoint(breaks, n: int, h: int) -> None:
    if breaks and n - breaks[-1] <= h:
        warnings.warn(f"break at t={breaks[-1]} lies within h={h} of the series end (n={n})",
                      BreaksNearEndpoint, stacklevel=3)


def fit(series: TimeSeries, config: Optional[RunConfig] = None) -> LtstaModel:
    """Estimate the decomposition.

    1. Piecewise-linear trend on the transformed series and a break count.
    2. Harmonics and ARMA orders by AICc on the detrended series.
    3. Break positions re-estimated, for the same count, after removing the
       seasonal and fitted ARMA parts.
    4. Joint regression with ARMA errors on the refined trend design and the
       selected harmonics.

    ``config.passes > 1`` repeats steps 2 and 3 from the refined trend.
    """
    config = config or RunConfig()
    spec = resolve_transform(series, config)
    y = np.asarray(apply_transform(series.values, spec), dtype=float)
    n = y.size
    period = config.period or series.period
    h = config.h
    m_max = resolve_m_max(n, config)

    # step 1
    table = dp_segment(y, m_max, h, config.dp_method)
    curve = table.ssr_curve if config.cost == "ssr" else table.sar_curve(y)
    policy = "manual" if config.m is not None else config.policy
    selection = select_num_breaks(curve, policy, config.m, config.cost,
                                  zero_cost_level(y, config.cost))
    m = selection.m_selected
    trend0 = table.best_by_k[m]
    logger.info("step 1: m=%d breaks=%s", m, trend0.breaks)

    t = np.arange(1, n + 1)
    stages = []
    current = trend0
    for _ in range(config.passes):
        # step 2
        w = y - current.values(t)
        orders = select_orders(w, period, config.n_max, config.p_max, config.q_max)
        N, p, q = orders.n_harmonics, orders.p, orders.q
        seas = (fourier_design(n, period, N) @ orders.fit.coef if N else np.zeros(n))
        # step 3
        adjusted = y - seas - orders.fit.arma_fitted
        if m > 0:
            refined = dp_segment(adjusted, m, h, config.dp_method).best_by_k[m]
        else:
            refined = current
        stages.append(StageRecord(current.breaks, refined.breaks, N, p, q, orders.table))
        logger.info("step 3: breaks %s -> %s", current.breaks, refined.breaks)
        current = refined

    # step 4
    breaks = current.breaks
    Xt = build_design_matrix(n, Segmentation(breaks), h)
    X = np.column_stack([Xt, fourier_design(n, period, N)]) if N else Xt
    try:
        reg: RegArmaFit = fit_reg_arma(y, X, p, q)
    except DegenerateVariance:
        if p + q == 0:
            raise
        # the error process collapsed (exact fit or a perfectly predictable residual)
        logger.warning("degenerate error process; ARMA(%d,%d) replaced by white noise", p, q)
        p = q = 0
        reg = fit_reg_arma(y, X, 0, 0)
    kt = Xt.shape[1]
    resid_reg = y - X @ reg.coef
    trend = TrendFit(Segmentation(breaks), float(reg.coef[0]),
                     tuple(float(c) for c in reg.coef[1:kt]), float(resid_reg @ resid_reg), n)
    seasonal = (SeasonalFit.from_vector(period, N, reg.coef[kt:]) if N
                else SeasonalFit(max(period, 1), 0))
    _check_endpoint(breaks, n, h)

    try:
        diagnostics = diagnose(reg.std_residuals)
    except TooFewResiduals:
        diagnostics = None
    return LtstaModel(series, spec, y, trend, seasonal, reg.arma, reg.coef, reg.residuals,
                      reg.arma_fitted, reg.prediction_var, reg.state, selection, diagnostics,
                      config, stages)


# -- forecasting ---------------------------------------------------------------

@dataclass(frozen=True)
class ForecastResult:
    horizon: int
    level: float
    labels: List[str]
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    trend: np.ndarray
    seasonal: np.ndarray
    arma: np.ndarray
    variance: np.ndarray
    mean_transformed: np.ndarray

    def rows(self) -> List[dict]:
        return [{"step": i + 1, "label": self.labels[i], "point": float(self.point[i]),
                 "lower": float(self.lower[i]), "upper": float(self.upper[i]),
                 "trend": float(self.trend[i]), "seasonal": float(self.seasonal[i]),
                 "arma": float(self.arma[i]), "variance": float(self.variance[i])}
                for i in range(self.horizon)]

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "level": self.level, "rows": self.rows()}


def _invert_clipped(x: np.ndarray, spec: TransformSpec) -> np.ndarray:
    # Box-Cox bounds may leave the inverse domain; pin them to its edge
    if spec.kind == "box_cox" and spec.lam != 0.0:
        edge = -1.0 / spec.lam
        x = np.maximum(x, edge) if spec.lam > 0 else np.minimum(x, edge)
        base = np.maximum(1.0 + spec.lam * x, 0.0)
        with np.errstate(divide="ignore"):
            return np.exp(np.log(base) / spec.lam)
    return np.asarray(invert_transform(x, spec))


def forecast(model: LtstaModel, f: int, level: float = 0.95) -> ForecastResult:
    """Forecast ``f`` steps ahead with Gaussian intervals conditional on the breaks."""
    if f < 1:
        raise ValidationError("horizon must be at least 1")
    if not 0.0 < level < 1.0:
        raise ValidationError("level must lie in (0, 1)")
    t = np.arange(model.n + 1, model.n + f + 1)
    trend = model.trend.values(t)
    seasonal = model.seasonal.values(t)
    arma_pt, var = forecast_arma(model.arma, model.state, f)
    mean = trend + seasonal + arma_pt
    half = stats.norm.ppf(0.5 + level / 2.0) * np.sqrt(var)
    labels = [model.series.label(int(s)) for s in t]
    return ForecastResult(
        f, level, labels, _invert_clipped(mean, model.transform),
        _invert_clipped(mean - half, model.transform), _invert_clipped(mean + half, model.transform),
        trend, seasonal, arma_pt, var, mean)


# -- summary ---------------------------------------------------------------------

def parameter_names(model: LtstaModel) -> List[str]:
    names = ["beta0_1"] + [f"beta1_{i + 1}" for i in range(model.trend.m + 1)]
    for kind, k in fourier_columns(model.period, model.seasonal.n_harmonics):
        names.append(f"{'a' if kind == 'cos' else 'b'}_{k}")
    names += [f"phi_{i + 1}" for i in range(model.arma.p)]
    names += [f"theta_{j + 1}" for j in range(model.arma.q)]
    names.append("sigma2")
    return names


def summarize(model: LtstaModel, level: float = 0.95) -> dict:
    """Coefficient table with Hessian-based standard errors, plus diagnostics.

    Break positions are treated as known, so they carry no standard errors.
    """
    reg = RegArmaFit(model.coef, model.arma, model.residuals, model.arma_fitted,
                     model.prediction_var, model.state)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cov = hessian_covariance(model.y, model.design(), reg)
    est = np.concatenate([model.coef, model.arma.phi, model.arma.theta, [model.arma.sigma2]])
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    zq = stats.norm.ppf(0.5 + level / 2.0)
    rows = []
    for name, b, s in zip(parameter_names(model), est, se):
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.float64(b) / s
        p = float(2.0 * stats.norm.sf(abs(z))) if not np.isnan(z) else np.nan
        rows.append({"name": name, "coef": float(b), "std_err": float(s), "z": float(z),
                     "p_value": p, "ci_lower": float(b - zq * s), "ci_upper": float(b + zq * s)})
    return {
        "n": model.n,
        "transform": model.transform.to_dict(),
        "breaks": list(model.breaks),
        "break_labels": [model.series.label(c) for c in model.breaks],
        "n_harmonics": model.seasonal.n_harmonics,
        "order": [model.arma.p, model.arma.q],
        "loglik": model.arma.loglik,
        "aicc": model.arma.aicc,
        "level": level,
        "parameters": rows,
        "diagnostics": None if model.diagnostics is None else model.diagnostics.to_dict(),
    }
