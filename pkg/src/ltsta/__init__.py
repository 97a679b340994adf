"""Piecewise-linear trend, Fourier seasonality and ARMA error decomposition."""

from .arma import (ArmaFit, RegArmaFit, fit_arma, fit_reg_arma, forecast_arma, gaussian_loglik,
                   select_orders)
from .config import RunConfig, load_config
from .errors import LtstaError, NumericalError, ValidationError
from .metrics import MetricSet, aggregate, baseline_forecast, compute_metrics
from .model import (BreaksNearEndpoint, DiagnosticsReport, ForecastResult, LtstaModel, diagnose,
                    fit, forecast, summarize)
from .seasonal import SeasonalFit, fourier_design
from .selection import SelectionReport, l_method, select_num_breaks
from .series import TimeSeries, TransformSpec, apply_transform, invert_transform
from .simulate import SimulationSpec, simulate
from .trend import Segmentation, TrendFit, build_design_matrix, dp_segment, fit_ols

__version__ = "0.1.0"
