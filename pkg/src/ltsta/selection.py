"""Choosing the number of breaks from the cost-versus-breaks curve."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import CurveTooShort, ValidationError, ZeroSsr
from .trend import fit_ols

logger = logging.getLogger(__name__)

POLICIES = ("absolute", "ratio", "l_method", "manual")


def default_m_max(n: int) -> int:
    if n < 120:
        return 10
    if n < 360:
        return 20
    return 30


def improvement_ratios(ssr_curve: Sequence[float]) -> np.ndarray:
    """``r_i = 1 - SSR_i / SSR_{i-1}`` for ``i = 1..m_max``."""
    c = np.asarray(ssr_curve, dtype=float)
    if c.size < 2:
        raise CurveTooShort("need at least two SSR values")
    if np.any(c[:-1] == 0):
        k = int(np.flatnonzero(c[:-1] == 0)[0])
        raise ZeroSsr(f"SSR is zero at k={k}; ratios undefined beyond it")
    return 1.0 - c[1:] / c[:-1]


def absolute_improvements(ssr_curve: Sequence[float], m_l: int) -> np.ndarray:
    """``d_j = SSR_{j-1} - SSR_j`` for ``j = m_l+1..m_max``."""
    c = np.asarray(ssr_curve, dtype=float)
    m_max = c.size - 1
    if not 0 <= m_l < m_max:
        raise ValidationError(f"m_L={m_l} must be below m_max={m_max}")
    return c[m_l:-1] - c[m_l + 1:]


def _l_method_fits(curve: np.ndarray) -> np.ndarray:
    m_max = curve.size - 1
    ssr = np.empty(m_max - 1)
    for c in range(1, m_max):
        # curve index k sits at time k+1; a knot at k=c is a break at t=c+1
        ssr[c - 1] = fit_ols(curve, (c + 1,)).ssr
    return ssr


def l_method(ssr_curve: Sequence[float]) -> int:
    """Knee of the curve via a continuous two-segment linear fit.

    Candidate knees run over ``c = 1..m_max-1`` so both segments hold at least
    two points (sharing the knee).  Ties go to the smallest ``c``.
    """
    curve = np.asarray(ssr_curve, dtype=float)
    if curve.size < 4:
        raise CurveTooShort("L-method needs at least four points (k = 0..3)")
    scale = curve.std()
    z = (curve - curve.mean()) / scale if scale > 0 else curve - curve.mean()
    ssr = _l_method_fits(z)
    tol = 1e-12 * max(float(z @ z), 1.0)
    return int(np.flatnonzero(ssr <= ssr.min() + tol)[0]) + 1


@dataclass
class SelectionReport:
    ssr_curve: List[float]
    m_l: Optional[int]
    ratios: List[float]
    diffs: List[float]
    tau_r: Optional[float]
    tau_d: Optional[float]
    m_selected: int
    method: str
    cost: str = "ssr"
    flags: List[str] = field(default_factory=list)
    ratio_choice: Optional[int] = None
    absolute_choice: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _first_rejection(metric: np.ndarray, threshold: float, offset: int) -> int:
    """Last accepted k before the first rejected one; metric[i] belongs to k=offset+i."""
    for i, v in enumerate(metric):
        if v < threshold:
            return offset + i - 1
    return offset + metric.size - 1


def zero_cost_level(y, cost: str = "ssr") -> float:
    """Cost below which a fit of ``y`` is exact up to floating-point rounding."""
    y = np.asarray(y, dtype=float)
    unit = 1e-10 * max(float(np.abs(y).max(initial=0.0)), 1e-300)
    return y.size * (unit * unit if cost == "ssr" else unit)


def select_num_breaks(ssr_curve: Sequence[float], policy: str = "absolute",
                      m: Optional[int] = None, cost: str = "ssr",
                      zero_level: float = 0.0) -> SelectionReport:
    """Apply the L-method and the ratio/absolute improvement rules.

    All three diagnostics are computed whenever the curve allows it; ``policy``
    picks which one fixes ``m_selected``.  ``policy="manual"`` records the
    supplied ``m`` alongside the diagnostics.  Costs at or below
    ``zero_level`` (see :func:`zero_cost_level`) count as a perfect fit.
    """
    if policy not in POLICIES:
        raise ValidationError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    curve = np.asarray(ssr_curve, dtype=float)
    if curve.size < 2:
        raise CurveTooShort("need the k=0 and k=1 costs at least")
    m_max = curve.size - 1
    flags: List[str] = []

    # a perfect fit ends the search: more breaks cannot improve on zero
    zero_tol = max(1e-12 * curve[0], zero_level, np.finfo(float).tiny)
    zeros = np.flatnonzero(curve <= zero_tol)
    cut = int(zeros[0]) if zeros.size else None
    work = curve[: cut + 1] if cut is not None else curve

    m_l = None
    ratios = np.array([])
    diffs = np.array([])
    tau_r = tau_d = None
    ratio_m = abs_m = None
    if cut is not None:
        flags.append(f"perfect_fit_at_k={cut}")
    if work.size >= 2 and work[:-1].min() > 0:
        ratios = improvement_ratios(work)
        tau_r = float(ratios.mean())
        ratio_m = _first_rejection(ratios, tau_r - 1e-12 * abs(tau_r), 1)
        if np.allclose(ratios, ratios[0], rtol=1e-9, atol=1e-15):
            flags.append("degenerate_equal_ratios")
    if work.size >= 4:
        m_l = l_method(work)
        if np.ptp(np.diff(work)) <= 1e-12 * max(np.abs(work).max(), 1.0):
            flags.append("degenerate_straight_curve")
        wmax = work.size - 1
        if m_l >= wmax - 1:
            flags.append("tau_d_undefined_fallback_ratio")
        else:
            diffs = absolute_improvements(work, m_l)
            tau_d = float(diffs.mean())
            abs_m = _first_rejection(diffs, tau_d - 1e-12 * abs(tau_d), m_l + 1)
    if work.size >= 2 and np.ptp(work) <= 1e-12 * max(abs(work[0]), np.finfo(float).tiny):
        flags.append("flat_curve")

    method = policy
    if policy == "manual":
        if m is None or not 0 <= m <= m_max:
            raise ValidationError(f"manual m must be in [0, {m_max}]")
        chosen = int(m)
    elif policy == "l_method":
        chosen = m_l if m_l is not None else (cut or 0)
    elif cut is not None:
        chosen = cut
    elif policy == "ratio" or abs_m is None:
        if policy == "absolute":
            method = "ratio"
            logger.warning("absolute threshold unavailable; falling back to ratio policy")
        chosen = ratio_m if ratio_m is not None else 0
    else:
        chosen = abs_m
    if policy != "manual":
        # a break that does not lower the cost is never worth keeping
        while chosen > 0 and curve[chosen] >= curve[chosen - 1]:
            chosen -= 1
    if "degenerate_equal_ratios" in flags and method == "ratio":
        logger.warning("all improvement ratios are equal; selection is degenerate")

    return SelectionReport(
        ssr_curve=curve.tolist(), m_l=m_l, ratios=ratios.tolist(), diffs=diffs.tolist(),
        tau_r=tau_r, tau_d=tau_d, m_selected=int(chosen), method=method, cost=cost,
        flags=flags, ratio_choice=ratio_m, absolute_choice=abs_m,
    )
