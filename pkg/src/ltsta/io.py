"""File formats: series CSV, CIF-style datasets, JSON and CSV outputs."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .errors import InvalidSeries, ParseError, ValidationError
from .series import TimeSeries, label_period

_FREQ_WORDS = {"monthly": 12, "quarterly": 4, "yearly": 1, "annual": 1, "weekly": 52,
               "daily": 7, "hourly": 24}


def _number(text: str, line: int, what: str = "value") -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"line {line}: cannot parse {what} {text!r}", line) from None
    if not math.isfinite(v):
        raise ParseError(f"line {line}: non-finite {what} {text!r}", line)
    return v


def read_series_csv(path, period: Optional[int] = None) -> TimeSeries:
    """Read ``label,value`` or single ``value`` CSV with a header row.

    The period defaults to the one implied by the first label (4 for
    ``2002Q1``, 12 for ``2002-01``), else 1.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", 1)
    header = [h.strip().lower() for h in rows[0]]
    if header == ["value"]:
        label_col, value_col = None, 0
    elif len(header) == 2 and header[1] == "value":
        label_col, value_col = 0, 1
    else:
        raise ParseError(f"line 1: expected header 'label,value' or 'value', got {rows[0]}", 1)
    labels, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} fields, got {len(row)}",
                             lineno)
        values.append(_number(row[value_col].strip(), lineno))
        if label_col is not None:
            labels.append((lineno, row[label_col].strip()))
    if not values:
        raise ParseError("no observations", len(rows))
    start = labels[0][1] if labels else None
    if start is not None:
        try:
            implied = label_period(start)
        except ValidationError:
            start, implied = None, None
        if period is None:
            period = implied or 1
        if implied is not None and implied != period:
            start = None
    try:
        ts = TimeSeries(np.array(values), period or 1, start)
    except InvalidSeries as exc:
        raise ParseError(str(exc)) from None
    if start is not None:
        for i, (lineno, lab) in enumerate(labels):
            try:
                ok = ts.index_of(lab) == i + 1
            except ValidationError:
                ok = False
            if not ok:
                raise ParseError(f"line {lineno}: label {lab!r} breaks the sequence", lineno)
    return ts


def write_series_csv(path, ts: TimeSeries) -> None:
    write_csv(path, [{"label": ts.label(t), "value": float(v)}
                     for t, v in enumerate(ts.values, start=1)], ["label", "value"])


@dataclass(frozen=True)
class CifSeries:
    series_id: str
    horizon: int
    frequency: int
    values: np.ndarray
    line: int


def read_cif(path) -> List[CifSeries]:
    """Read ``id;horizon;frequency;v1;...`` lines.

    The frequency token may be a word (``monthly``...) and may be missing, in
    which case monthly data is assumed.  Lines that fail to parse are
    returned as :class:`ParseError` instances so callers can record them.
    """
    out = []
    with open(path, encoding="utf-8-sig") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                out.append(_parse_cif_line(line, lineno))
            except ParseError as exc:
                out.append(exc)
    return out


def _parse_cif_line(line: str, lineno: int) -> CifSeries:
    tokens = [t.strip() for t in line.replace(",", ";").split(";")]
    tokens = [t for t in tokens if t != ""]
    if len(tokens) < 3:
        raise ParseError(f"line {lineno}: too few fields", lineno)
    sid = tokens[0]
    try:
        horizon = int(tokens[1])
    except ValueError:
        raise ParseError(f"line {lineno}: bad horizon {tokens[1]!r}", lineno) from None
    if horizon < 1:
        raise ParseError(f"line {lineno}: horizon must be positive", lineno)
    rest = tokens[2:]
    freq = 12
    if rest and rest[0].lower() in _FREQ_WORDS:
        freq = _FREQ_WORDS[rest[0].lower()]
        rest = rest[1:]
    values = np.array([_number(t, lineno) for t in rest])
    if values.size == 0:
        raise ParseError(f"line {lineno}: no values", lineno)
    return CifSeries(sid, horizon, freq, values, lineno)


def read_cif_actuals(path) -> dict:
    """``id;v1;...`` lines with held-out values, keyed by series id."""
    out = {}
    with open(path, encoding="utf-8-sig") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            tokens = [t.strip() for t in line.replace(",", ";").split(";") if t.strip()]
            out[tokens[0]] = np.array([_number(t, lineno) for t in tokens[1:]])
    return out


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_clean(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(x) for x in obj]
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2) + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else v


def write_csv(path, rows: Iterable[dict], columns: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in columns})


def read_values_csv(path) -> np.ndarray:
    """Values column of a series CSV, or the ``point`` column of a forecast CSV."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError("empty file", 1)
        key = "point" if "point" in reader.fieldnames else "value"
        if key not in reader.fieldnames:
            raise ParseError("line 1: need a 'value' or 'point' column", 1)
        return np.array([_number(r[key], i) for i, r in enumerate(reader, start=2)])
