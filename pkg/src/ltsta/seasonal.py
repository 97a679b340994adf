"""Deterministic Fourier seasonality."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import HarmonicsOutOfRange


def max_harmonics(period: int) -> int:
    return period // 2


def fourier_columns(period: int, n_harmonics: int) -> List[Tuple[str, int]]:
    """Column layout ``[("cos", 1), ("sin", 1), ...]``.

    For even periods the sine at ``k = P/2`` vanishes at integer times and is
    left out.
    """
    cols = []
    for k in range(1, n_harmonics + 1):
        cols.append(("cos", k))
        if 2 * k != period:
            cols.append(("sin", k))
    return cols


def _check(period: int, n_harmonics: int) -> None:
    if n_harmonics == 0:
        return
    if period < 2 or not 1 <= n_harmonics <= max_harmonics(period):
        raise HarmonicsOutOfRange(
            f"harmonics must lie in [1, {max_harmonics(period)}] for period {period}, "
            f"got {n_harmonics}"
        )


def fourier_basis(t, period: int, n_harmonics: int) -> np.ndarray:
    """Fourier regressors evaluated at (1-based, global) times ``t``."""
    _check(period, n_harmonics)
    t = np.asarray(t, dtype=float)
    out = np.empty((t.size, len(fourier_columns(period, n_harmonics))))
    for j, (kind, k) in enumerate(fourier_columns(period, n_harmonics)):
        # reduce the phase first so large t keeps full precision
        phase = 2.0 * np.pi * np.mod(k * t, period) / period
        out[:, j] = np.cos(phase) if kind == "cos" else np.sin(phase)
    return out


def fourier_design(n: int, period: int, n_harmonics: int) -> np.ndarray:
    return fourier_basis(np.arange(1, n + 1), period, n_harmonics)


@dataclass(frozen=True)
class SeasonalFit:
    period: int
    n_harmonics: int
    cos_coefs: Tuple[float, ...] = ()
    sin_coefs: Tuple[float, ...] = ()

    def __post_init__(self):
        _check(self.period, self.n_harmonics)
        a = tuple(float(x) for x in self.cos_coefs) or (0.0,) * self.n_harmonics
        b = tuple(float(x) for x in self.sin_coefs) or (0.0,) * self.n_harmonics
        if len(a) != self.n_harmonics or len(b) != self.n_harmonics:
            raise HarmonicsOutOfRange("need one cosine and one sine coefficient per harmonic")
        if self.n_harmonics and 2 * self.n_harmonics == self.period:
            b = b[:-1] + (0.0,)
        object.__setattr__(self, "cos_coefs", a)
        object.__setattr__(self, "sin_coefs", b)

    @classmethod
    def from_vector(cls, period: int, n_harmonics: int, coefs: Sequence[float]) -> "SeasonalFit":
        """Build from coefficients laid out as :func:`fourier_columns`."""
        a = [0.0] * n_harmonics
        b = [0.0] * n_harmonics
        cols = fourier_columns(period, n_harmonics)
        if len(coefs) != len(cols):
            raise HarmonicsOutOfRange(f"expected {len(cols)} coefficients, got {len(coefs)}")
        for (kind, k), c in zip(cols, coefs):
            (a if kind == "cos" else b)[k - 1] = float(c)
        return cls(period, n_harmonics, tuple(a), tuple(b))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.cos_coefs[k - 1] if kind == "cos" else self.sin_coefs[k - 1]
                         for kind, k in fourier_columns(self.period, self.n_harmonics)])

    @property
    def n_params(self) -> int:
        return len(fourier_columns(self.period, self.n_harmonics))

    def values(self, t) -> np.ndarray:
        return seasonal_values(self, t)

    def to_dict(self) -> dict:
        return {"period": self.period, "n_harmonics": self.n_harmonics,
                "cos": list(self.cos_coefs), "sin": list(self.sin_coefs)}

    @classmethod
    def from_dict(cls, d: dict) -> "SeasonalFit":
        return cls(int(d["period"]), int(d["n_harmonics"]), tuple(d["cos"]), tuple(d["sin"]))


def seasonal_values(fit: SeasonalFit, t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if fit.n_harmonics == 0:
        return np.zeros(t.size)
    return fourier_basis(t, fit.period, fit.n_harmonics) @ fit.vector
