"""Series container, calendar labels and invertible pre-transforms."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidSeries, InversionDomain, NonPositiveValue, ValidationError

_QUARTER = re.compile(r"^(\d{4})\s*[-]?\s*Q([1-4])$", re.IGNORECASE)
_MONTH = re.compile(r"^(\d{4})(?:-|M)(\d{1,2})$", re.IGNORECASE)
_INT = re.compile(r"^[+-]?\d+$")


def parse_label(label: str, period: Optional[int] = None) -> tuple[str, int, int]:
    """Parse a calendar label into ``(kind, year_or_base, phase)``.

    Recognised forms are ``2002Q1`` (quarterly), ``2002-01`` / ``2002M01``
    (monthly) and plain integers.
    """
    s = label.strip()
    m = _QUARTER.match(s)
    if m:
        kind, year, phase = "quarter", int(m.group(1)), int(m.group(2))
    else:
        m = _MONTH.match(s)
        if m and 1 <= int(m.group(2)) <= 12:
            kind, year, phase = "month", int(m.group(1)), int(m.group(2))
        elif _INT.match(s):
            return "int", int(s), 0
        else:
            raise ValidationError(f"unrecognised label {label!r}")
    expected = 4 if kind == "quarter" else 12
    if period is not None and period != expected:
        raise ValidationError(
            f"label {label!r} implies period {expected}, got period {period}"
        )
    return kind, year, phase


def label_period(label: str) -> Optional[int]:
    kind, _, _ = parse_label(label)
    return {"quarter": 4, "month": 12}.get(kind)


def shift_label(label: str, steps: int, period: Optional[int] = None) -> str:
    """Label ``steps`` observations after ``label``."""
    kind, base, phase = parse_label(label, period)
    if kind == "int":
        return str(base + steps)
    per = 4 if kind == "quarter" else 12
    idx = base * per + (phase - 1) + steps
    year, ph = divmod(idx, per)
    if kind == "quarter":
        return f"{year}Q{ph + 1}"
    return f"{year}-{ph + 1:02d}"


@dataclass(frozen=True)
class TimeSeries:
    """Ordered observations with seasonal period metadata.

    ``values`` is stored as a read-only float array.  ``start_label`` (if
    given) labels the first observation; later labels are generated from it.
    """

    values: np.ndarray
    period: int = 1
    start_label: Optional[str] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size < 1:
            raise InvalidSeries("series must contain at least one observation")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise InvalidSeries(f"non-finite value at position {bad + 1}")
        if int(self.period) != self.period or self.period < 1:
            raise InvalidSeries(f"period must be a positive integer, got {self.period}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "period", int(self.period))
        if self.start_label is not None:
            try:
                parse_label(self.start_label, self.period if self.period in (4, 12) else None)
            except ValidationError as exc:
                raise InvalidSeries(str(exc)) from None

    @property
    def n(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.n

    def label(self, t: int) -> str:
        """Label of 1-based time index ``t`` (may exceed ``n``)."""
        if self.start_label is None:
            return str(t)
        return shift_label(self.start_label, t - 1)

    def labels(self, start: int = 1, stop: Optional[int] = None) -> list[str]:
        stop = self.n if stop is None else stop
        return [self.label(t) for t in range(start, stop + 1)]

    def index_of(self, label: str) -> int:
        """1-based index of ``label`` (inverse of :meth:`label`)."""
        if self.start_label is None:
            return int(label)
        k0, b0, p0 = parse_label(self.start_label)
        k1, b1, p1 = parse_label(label)
        if k0 != k1:
            raise ValidationError(f"label {label!r} incompatible with {self.start_label!r}")
        if k0 == "int":
            return b1 - b0 + 1
        per = 4 if k0 == "quarter" else 12
        return (b1 * per + p1) - (b0 * per + p0) + 1

    def with_values(self, values: Sequence[float]) -> "TimeSeries":
        return TimeSeries(np.asarray(values, dtype=float), self.period, self.start_label)

    def split(self, n_train: int) -> tuple["TimeSeries", "TimeSeries"]:
        """Split into the first ``n_train`` observations and the remainder."""
        if not 1 <= n_train < self.n:
            raise ValidationError(f"n_train must be in [1, {self.n - 1}]")
        head = TimeSeries(self.values[:n_train], self.period, self.start_label)
        tail_label = None if self.start_label is None else self.label(n_train + 1)
        tail = TimeSeries(self.values[n_train:], self.period, tail_label)
        return head, tail


_KINDS = ("identity", "log", "box_cox")


@dataclass(frozen=True)
class TransformSpec:
    kind: str = "identity"
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown transform {self.kind!r}; expected one of {_KINDS}")
        if not np.isfinite(self.lam):
            raise ValidationError("Box-Cox lambda must be finite")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lambda": self.lam}

    @classmethod
    def from_dict(cls, d: dict) -> "TransformSpec":
        return cls(d.get("kind", "identity"), float(d.get("lambda", 1.0)))


def suggest_transform(values: Sequence[float], ratio: float = 1.5) -> TransformSpec:
    """Pick ``log`` for positive series spanning a wide multiplicative range.

    A positive series whose max/min ratio exceeds ``ratio`` is treated as
    multiplicative; anything else is left untransformed.
    """
    v = np.asarray(values, dtype=float)
    if np.all(v > 0) and v.max() / v.min() > ratio:
        return TransformSpec("log")
    return TransformSpec("identity")


def _forward(y: np.ndarray, spec: TransformSpec) -> np.ndarray:
    if spec.kind == "identity":
        return y.copy()
    if np.any(y <= 0):
        raise NonPositiveValue(f"{spec.kind} transform requires strictly positive values")
    if spec.kind == "log" or spec.lam == 0.0:
        return np.log(y)
    lam = spec.lam
    # expm1/log keeps precision for small lambda
    return np.expm1(lam * np.log(y)) / lam


def _backward(x: np.ndarray, spec: TransformSpec) -> np.ndarray:
    if spec.kind == "identity":
        return x.copy()
    if spec.kind == "log" or spec.lam == 0.0:
        return np.exp(x)
    lam = spec.lam
    base = lam * x
    if np.any(base <= -1.0):
        raise InversionDomain("Box-Cox inverse undefined where lambda*x <= -1")
    return np.exp(np.log1p(base) / lam)


def apply_transform(series, spec: TransformSpec):
    """Transform a :class:`TimeSeries` (or plain array) elementwise."""
    if isinstance(series, TimeSeries):
        return series.with_values(_forward(series.values, spec))
    return _forward(np.asarray(series, dtype=float), spec)


def invert_transform(series, spec: TransformSpec):
    if isinstance(series, TimeSeries):
        return series.with_values(_backward(series.values, spec))
    return _backward(np.asarray(series, dtype=float), spec)
