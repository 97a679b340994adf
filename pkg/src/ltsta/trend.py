"""Continuous piecewise-linear trend estimation.

Time indices are 1-based.  A segmentation ``(c_1, ..., c_m)`` lists the last
index of every regime but the final one; regime ``i`` covers
``c_{i-1} < t <= c_i`` with ``c_0 = 0`` and ``c_{m+1} = n``.  Continuity at the
breaks is built into the hinge basis returned by :func:`build_design_matrix`, so
every conditioned fit is an ordinary least-squares problem.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .errors import BudgetInfeasible, InvalidSegmentation, RankDeficient, WindowTooShort

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10


@dataclass(frozen=True)
class Segmentation:
    breaks: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "breaks", tuple(int(c) for c in self.breaks))

    @property
    def m(self) -> int:
        return len(self.breaks)

    def validate(self, n: int, h: int = 1) -> None:
        """Raise :class:`InvalidSegmentation` unless every regime has >= h points."""
        edges = (0,) + self.breaks + (n,)
        for a, b in zip(edges[:-1], edges[1:]):
            if b - a < h:
                raise InvalidSegmentation(
                    f"breaks {self.breaks} violate min segment length {h} for n={n}"
                )


def _as_segmentation(seg) -> Segmentation:
    return seg if isinstance(seg, Segmentation) else Segmentation(tuple(seg))


def hinge_basis(t: np.ndarray, breaks: Sequence[int]) -> np.ndarray:
    """Trend basis evaluated at arbitrary (possibly out-of-sample) times.

    Column 0 is the constant, column 1 is ``min(t, c_1)`` and column ``1+i``
    is the time spent in regime ``i+1``.  The last regime is open-ended.
    """
    t = np.asarray(t, dtype=float)
    edges = list(breaks) + [np.inf]
    cols = [np.ones_like(t), np.minimum(t, edges[0])]
    for i, c in enumerate(breaks):
        cols.append(np.maximum(0.0, np.minimum(t, edges[i + 1]) - c))
    return np.column_stack(cols)


def build_design_matrix(n: int, segmentation, h: int = 1) -> np.ndarray:
    """``n x (m+2)`` continuity-constrained trend design for ``t = 1..n``."""
    seg = _as_segmentation(segmentation)
    seg.validate(n, h)
    return hinge_basis(np.arange(1, n + 1), seg.breaks)


@dataclass(frozen=True)
class TrendFit:
    segmentation: Segmentation
    beta0_first: float
    slopes: Tuple[float, ...]
    ssr: float
    n: int

    @property
    def breaks(self) -> Tuple[int, ...]:
        return self.segmentation.breaks

    @property
    def m(self) -> int:
        return self.segmentation.m

    @property
    def beta(self) -> np.ndarray:
        return np.array((self.beta0_first,) + tuple(self.slopes))

    @property
    def intercepts(self) -> np.ndarray:
        """Per-regime intercepts implied by continuity at each break."""
        out = [self.beta0_first]
        for i, c in enumerate(self.breaks):
            out.append(out[-1] + (self.slopes[i] - self.slopes[i + 1]) * c)
        return np.array(out)

    def values(self, t) -> np.ndarray:
        return trend_values(self, t)

    def to_dict(self) -> dict:
        return {
            "breaks": list(self.breaks),
            "beta0_first": self.beta0_first,
            "slopes": list(self.slopes),
            "intercepts": self.intercepts.tolist(),
            "ssr": self.ssr,
            "n": self.n,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrendFit":
        return cls(Segmentation(tuple(d["breaks"])), float(d["beta0_first"]),
                   tuple(float(s) for s in d["slopes"]), float(d["ssr"]), int(d["n"]))


def lstsq_checked(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """SVD least squares that refuses numerically singular designs."""
    coef, _, rank, sv = np.linalg.lstsq(X, y, rcond=None)
    if sv.size == 0 or sv[-1] <= RANK_TOL * sv[0] or rank < X.shape[1]:
        raise RankDeficient(f"design matrix is rank deficient (rank {rank} < {X.shape[1]})")
    return coef


def fit_ols(y: Sequence[float], segmentation, h: int = 1) -> TrendFit:
    y = np.asarray(y, dtype=float)
    seg = _as_segmentation(segmentation)
    n = y.size
    if n < seg.m + 2:
        raise RankDeficient(f"n={n} too small for {seg.m} breaks")
    X = build_design_matrix(n, seg, h)
    coef = lstsq_checked(X, y)
    resid = y - X @ coef
    return TrendFit(seg, float(coef[0]), tuple(float(c) for c in coef[1:]),
                    float(resid @ resid), n)


def trend_values(fit: TrendFit, t) -> np.ndarray:
    """Evaluate the fitted trend; times beyond ``n`` follow the last regime."""
    return hinge_basis(np.atleast_1d(t), fit.breaks) @ fit.beta


def _window_single_break(w: np.ndarray, h: int) -> Tuple[int, float]:
    """Best local break position (1-based within ``w``) and its SSR."""
    L = w.size
    cands = np.arange(h, L - h + 1)
    s = np.arange(1, L + 1, dtype=float)
    X = np.empty((cands.size, L, 3))
    X[:, :, 0] = 1.0
    X[:, :, 1] = np.minimum(s[None, :], cands[:, None])
    X[:, :, 2] = np.maximum(0.0, s[None, :] - cands[:, None])
    Q, _ = np.linalg.qr(X)
    proj = np.einsum("cli,ci->cl", Q, np.einsum("cli,l->ci", Q, w))
    r = w[None, :] - proj
    ssr = np.einsum("cl,cl->c", r, r)
    tss = float(np.sum((w - w.mean()) ** 2))
    tol = 1e-12 * max(tss, np.finfo(float).tiny)
    k = int(np.flatnonzero(ssr <= ssr.min() + tol)[0])
    return int(cands[k]), float(ssr[k])


def grid_search_single_break(y: Sequence[float], i: int, j: int, h: int = 2) -> Tuple[int, float]:
    """Exhaustive one-break search on the window ``[i, j]`` (1-based, inclusive).

    Returns the global index of the best break and the window SSR.  Ties go to
    the smallest index.
    """
    y = np.asarray(y, dtype=float)
    if i < 1 or j > y.size or j - i + 1 < 2 * h:
        raise WindowTooShort(f"window [{i}, {j}] cannot hold one break with h={h}")
    c, ssr = _window_single_break(y[i - 1:j], h)
    return i - 1 + c, ssr


@dataclass
class SsrTable:
    """DP output: best segmentation per break count, plus the 1-break cache.

    ``single_break_ssr`` maps ``(i, j, c)`` (window bounds and its best break)
    to the window SSR.
    """

    best_by_k: List[TrendFit]
    h: int
    method: str
    single_break_ssr: Dict[Tuple[int, int, int], float] = field(default_factory=dict)

    @property
    def m_max(self) -> int:
        return len(self.best_by_k) - 1

    @property
    def ssr_curve(self) -> np.ndarray:
        return np.array([f.ssr for f in self.best_by_k])

    def sar_curve(self, y: Sequence[float]) -> np.ndarray:
        """Sum of absolute residuals of each stored segmentation."""
        y = np.asarray(y, dtype=float)
        return np.array([np.abs(y - trend_values(f, np.arange(1, y.size + 1))).sum()
                         for f in self.best_by_k])


def dp_segment(y: Sequence[float], m_max: int, h: int = 2, method: str = "exact") -> SsrTable:
    """Best continuous piecewise-linear fits with 0..m_max breaks.

    ``method="exact"`` runs a dynamic program whose state is a break position
    together with the trend value at that break; the cost of each partial
    path is a quadratic in that value, so exact minimisation only needs the
    lower envelope of those quadratics.  ``method="heuristic"`` combines
    stored (k-1)-break prefix solutions with a fresh single-break search on
    the remaining window and scores candidates additively.  Either way the
    reported SSRs come from a full constrained refit of the chosen breaks.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if m_max < 1:
        raise BudgetInfeasible("m_max must be at least 1")
    if h < 1:
        raise BudgetInfeasible("h must be at least 1")
    if n < (m_max + 1) * h or n < m_max + 2:
        raise BudgetInfeasible(f"n={n} cannot hold {m_max} breaks with h={h}")

    best: List[TrendFit] = [fit_ols(y, ())]
    c1, s1 = grid_search_single_break(y, 1, n, h)
    table: Dict[Tuple[int, int, int], float] = {(1, n, c1): s1}
    best.append(fit_ols(y, (c1,), h))

    if m_max >= 2:
        if method == "exact":
            paths = _exact_paths(y, m_max, h)
        elif method == "heuristic":
            paths = _heuristic_paths(y, m_max, h, table)
        else:
            raise ValueError(f"unknown DP method {method!r}")
        for k in range(2, m_max + 1):
            best.append(fit_ols(y, paths[k], h))
    return SsrTable(best, h, method, table)


# -- exact dynamic program -------------------------------------------------

@njit(cache=True)
def _lower_envelope(al, be, ga):
    """Indices of the convex parabolas ``al*v^2 + be*v + ga`` that are minimal
    somewhere on the real line.  Sweeps left to right, hopping to whichever
    parabola undercuts the current one first."""
    N = al.size
    if N <= 1:
        return np.arange(N)
    scale = np.abs(al).max() + np.abs(be).max() + np.abs(ga).max()
    tol = 1e-13 * scale
    # leftmost minimum: smallest curvature, then largest linear term, then offset
    cur = 0
    for i in range(1, N):
        if (al[i] < al[cur] or (al[i] == al[cur] and (be[i] > be[cur] or
                (be[i] == be[cur] and ga[i] < ga[cur])))):
            cur = i
    on = np.zeros(N, dtype=np.bool_)
    on[cur] = True
    v0 = -np.inf
    for _ in range(4 * N + 4):
        best = np.inf
        nxt = -1
        for j in range(N):
            if j == cur:
                continue
            a = al[j] - al[cur]
            b = be[j] - be[cur]
            c = ga[j] - ga[cur]
            onset = np.inf
            if abs(a) > tol:
                disc = b * b - 4.0 * a * c
                if disc > 0.0:
                    sq = np.sqrt(disc)
                    r1 = (-b - sq) / (2.0 * a)
                    r2 = (-b + sq) / (2.0 * a)
                    lo = min(r1, r2)
                    hi = max(r1, r2)
                    if a > 0.0 and lo > v0:
                        onset = lo
                    elif a < 0.0 and hi > v0:
                        onset = hi
            elif b < -tol:
                r = -c / b
                if r > v0:
                    onset = r
            if onset < best:
                best = onset
                nxt = j
        if nxt < 0:
            return np.flatnonzero(on)
        v0 = best
        cur = nxt
        on[cur] = True
    # sweep failed to terminate (numerical chatter): keeping everything is safe
    return np.arange(N)


def _exact_paths(y: np.ndarray, m_max: int, h: int) -> Dict[int, Tuple[int, ...]]:
    n = y.size
    t = np.arange(1, n + 1, dtype=float)
    # SSR is invariant to removing any global line, which also tames cancellation
    X = np.column_stack([np.ones(n), t])
    z = y - X @ np.linalg.lstsq(X, y, rcond=None)[0]
    sd = z.std()
    z = z / sd if sd > 0 else z
    Sy = np.concatenate([[0.0], np.cumsum(z)])
    Sty = np.concatenate([[0.0], np.cumsum(t * z)])
    Syy = np.concatenate([[0.0], np.cumsum(z * z)])

    # first regime [1, b]: line with value v at b, slope profiled out
    b = np.arange(h, n + 1)
    sy, sty, syy = Sy[b], Sty[b], Syy[b]
    sdd = (b - 1) * b * (2 * b - 1) / 6.0        # sum of (t-b)^2
    sdsum = -(b - 1) * b / 2.0                   # sum of (t-b)
    sdy = sty - b * sy
    with np.errstate(invalid="ignore", divide="ignore"):
        fa = np.where(sdd > 0, b - sdsum ** 2 / sdd, 1.0)
        fb = np.where(sdd > 0, -2 * sy + 2 * sdy * sdsum / sdd, -2 * sy)
        fc = np.where(sdd > 0, syy - sdy ** 2 / sdd, syy)

    def last_regime(a):
        L = n - a
        sy, sty, syy = Sy[n] - Sy[a], Sty[n] - Sty[a], Syy[n] - Syy[a]
        s1 = L * (L + 1) / 2.0
        s2 = L * (L + 1) * (2 * L + 1) / 6.0
        sdy = sty - a * sy
        return L - s1 ** 2 / s2, -2 * sy + 2 * sdy * s1 / s2, syy - sdy ** 2 / s2

    # level[k]: per end-break b, arrays (A, B, C, parent_a, parent_idx)
    level = {b_: (np.array([fa[i]]), np.array([fb[i]]), np.array([fc[i]]),
                  np.array([-1]), np.array([-1]))
             for i, b_ in enumerate(range(h, n + 1)) if b_ <= n - h}
    levels = [None, level]
    paths: Dict[int, Tuple[int, ...]] = {}

    for k in range(2, m_max + 1):
        prev = levels[k - 1]
        keys = sorted(prev)
        sizes = np.array([prev[a][0].size for a in keys])
        offs = np.concatenate([[0], np.cumsum(sizes)])
        PA = np.concatenate([prev[a][0] for a in keys])
        PB = np.concatenate([prev[a][1] for a in keys])
        PC = np.concatenate([prev[a][2] for a in keys])
        owner = np.repeat(np.array(keys), sizes)
        local = np.concatenate([np.arange(s) for s in sizes])
        pos = {a: i for i, a in enumerate(keys)}
        cur = {}
        for b_ in range(k * h, n - h + 1):
            hi_a = b_ - h
            lo_i = 0
            hi_i = np.searchsorted(keys, hi_a, side="right")
            if hi_i <= lo_i:
                continue
            sl = slice(offs[lo_i], offs[hi_i])
            a = owner[sl].astype(float)
            L = b_ - a
            sy = Sy[b_] - Sy[owner[sl]]
            sty = Sty[b_] - Sty[owner[sl]]
            syy = Syy[b_] - Syy[owner[sl]]
            sw = (L + 1) / 2.0
            sww = (L + 1) * (2 * L + 1) / (6.0 * L)
            M22, M12, M11 = sww, sw - sww, L - 2 * sw + sww
            g2 = (sty - a * sy) / L
            g1 = sy - g2
            Aa = PA[sl] + M11
            Bv = PB[sl] - 2 * g1
            A = M22 - M12 * M12 / Aa
            B = -2 * g2 - Bv * M12 / Aa
            C = PC[sl] + syy - Bv * Bv / (4 * Aa)
            keep = _lower_envelope(A, B, C)
            cur[b_] = (A[keep], B[keep], C[keep], owner[sl][keep], local[sl][keep])
        levels.append(cur)
        best_val, best_ref = np.inf, None
        for a_ in sorted(cur):
            A, B, C = cur[a_][:3]
            la, lb, lc = last_regime(a_)
            val = (C + lc) - (B + lb) ** 2 / (4 * (A + la))
            i = int(np.argmin(val))
            if best_ref is None or val[i] < best_val:
                best_val, best_ref = val[i], (a_, i)
        brk = []
        kk, (a_, i) = k, best_ref
        while kk >= 1:
            brk.append(a_)
            pa, pi = levels[kk][a_][3][i], levels[kk][a_][4][i]
            kk -= 1
            a_, i = int(pa), int(pi)
        paths[k] = tuple(reversed(brk))
    return paths


# -- heuristic recursion ---------------------------------------------------

def _heuristic_paths(y, m_max, h, table) -> Dict[int, Tuple[int, ...]]:
    n = y.size
    cache: Dict[Tuple[int, int], Tuple[int, float]] = {}

    def single(i, j):
        key = (i, j)
        if key not in cache:
            c, s = _window_single_break(y[i - 1:j], h)
            cache[key] = (i - 1 + c, s)
            table[(i, j, i - 1 + c)] = s
        return cache[key]

    # prefix[k][i] = (additive score, breaks) for the window [1, i]
    prefix = [{}, {i: (single(1, i)[1], (single(1, i)[0],)) for i in range(2 * h, n + 1)}]
    for k in range(2, m_max + 1):
        cur = {}
        for i in range((k + 1) * h, n + 1):
            best = None
            for j in range(k * h, i - 2 * h + 1):
                if j not in prefix[k - 1]:
                    continue
                score, brk = prefix[k - 1][j]
                c, s = single(j + 1, i)
                if c - brk[-1] < h:
                    continue
                total = score + s
                if best is None or total < best[0]:
                    best = (total, brk + (c,))
            if best is not None:
                cur[i] = best
        prefix.append(cur)
    out = {}
    for k in range(2, m_max + 1):
        if n not in prefix[k]:
            raise BudgetInfeasible(f"heuristic recursion found no {k}-break partition")
        out[k] = prefix[k][n][1]
    return out
