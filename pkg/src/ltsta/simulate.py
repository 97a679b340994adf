"""Synthetic series from the trend + harmonics + ARMA generative model.

Randomness comes from ``numpy.random.default_rng(seed)`` (PCG64): shocks are
``sqrt(sigma2) * standard_normal(burn_in + n)`` and the first ``burn_in``
simulated ARMA values are discarded.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.signal import lfilter

from .arma import is_causal, is_invertible
from .errors import ValidationError
from .seasonal import SeasonalFit
from .series import TimeSeries
from .trend import Segmentation, TrendFit

BURN_IN = 500


@dataclass(frozen=True)
class SimulationSpec:
    n: int
    slopes: Tuple[float, ...]
    breaks: Tuple[int, ...] = ()
    beta0: float = 0.0
    period: int = 1
    cos: Tuple[float, ...] = ()
    sin: Tuple[float, ...] = ()
    phi: Tuple[float, ...] = ()
    theta: Tuple[float, ...] = ()
    sigma2: float = 1.0
    start_label: Optional[str] = None

    def __post_init__(self):
        for name in ("slopes", "breaks", "cos", "sin", "phi", "theta"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.n < 1:
            raise ValidationError("n must be positive")
        if len(self.slopes) != len(self.breaks) + 1:
            raise ValidationError("need one slope per regime (len(breaks) + 1)")
        Segmentation(self.breaks).validate(self.n, 1)
        if len(self.cos) != len(self.sin):
            raise ValidationError("cos and sin need the same number of harmonics")
        if self.sigma2 < 0:
            raise ValidationError("sigma2 must be nonnegative")
        if not is_causal(self.phi):
            raise ValidationError("AR part is not causal")
        if not is_invertible(self.theta):
            raise ValidationError("MA part is not invertible")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationSpec":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValidationError(f"bad simulation spec: {exc}") from None


def deterministic_part(spec: SimulationSpec) -> Tuple[np.ndarray, np.ndarray]:
    t = np.arange(1, spec.n + 1)
    trend = TrendFit(Segmentation(spec.breaks), spec.beta0, spec.slopes, 0.0, spec.n).values(t)
    seasonal = SeasonalFit(spec.period, len(spec.cos), spec.cos, spec.sin).values(t)
    return trend, seasonal


def simulate_arma(phi, theta, sigma2: float, n: int, rng: np.random.Generator,
                  burn_in: int = BURN_IN) -> np.ndarray:
    eps = np.sqrt(sigma2) * rng.standard_normal(burn_in + n)
    z = lfilter(np.r_[1.0, theta], np.r_[1.0, -np.asarray(phi, dtype=float)], eps)
    return z[burn_in:]


def simulate(spec: SimulationSpec, seed: int = 0) -> TimeSeries:
    trend, seasonal = deterministic_part(spec)
    rng = np.random.default_rng(seed)
    z = simulate_arma(spec.phi, spec.theta, spec.sigma2, spec.n, rng)
    return TimeSeries(trend + seasonal + z, spec.period, spec.start_label)
