"""Zero-mean Gaussian ARMA estimation and regression with ARMA errors.

Conventions: ``Z_t = sum_i phi_i Z_{t-i} + e_t + sum_j theta_j e_{t-j}`` with
``e_t ~ N(0, sigma2)``.  The exact likelihood comes from a Kalman filter on the
Harvey state-space form, started from the stationary state covariance.

For regressions the coefficients and ``sigma2`` are profiled out: for fixed
ARMA parameters the filter is linear, so whitening ``y`` and every regressor
column with the same pass and running OLS on the standardized innovations
gives the GLS estimate.  The optimizer therefore only searches over the
(reparameterized) ARMA coefficients.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit
from scipy import linalg, optimize, signal

from .errors import (DegenerateVariance, NonStationaryParams, RankDeficient,
                     SampleTooSmall, ValidationError)
from .trend import lstsq_checked

logger = logging.getLogger(__name__)

ROOT_MARGIN = 1e-6
MAX_ITER = 500
LOGLIK_TOL = 1e-8
FD_STEP = 1e-6
_LOG2PI = np.log(2.0 * np.pi)


# -- polynomial checks and the stationarity-enforcing transform -------------

def _min_root_modulus(coefs: np.ndarray, sign: float) -> float:
    """Smallest |root| of ``1 + sign * sum_k coefs[k-1] z^k``."""
    coefs = np.asarray(coefs, dtype=float)
    if coefs.size == 0 or not np.any(coefs):
        return np.inf
    poly = np.concatenate([[1.0], sign * coefs])  # ascending powers
    # negligible leading terms only add roots far outside the unit circle
    while abs(poly[-1]) < 1e-12:
        poly = poly[:-1]
    if poly.size == 1:
        return np.inf
    roots = np.roots(poly[::-1])
    return float(np.abs(roots).min())


def is_causal(phi, margin: float = 0.0) -> bool:
    return _min_root_modulus(phi, -1.0) > 1.0 + margin


def is_invertible(theta, margin: float = 0.0) -> bool:
    return _min_root_modulus(theta, 1.0) > 1.0 + margin


def constrain_coefs(x: np.ndarray) -> np.ndarray:
    """Map unconstrained reals to coefficients of a stationary AR polynomial.

    ``x`` becomes partial autocorrelations in (-1, 1), which the
    Durbin-Levinson recursion turns into ``phi`` with all roots of
    ``1 - sum phi_k z^k`` outside the unit circle.
    """
    x = np.asarray(x, dtype=float)
    r = x / np.sqrt(1.0 + x * x)
    phi = np.zeros(0)
    for k, rk in enumerate(r):
        phi = np.concatenate([phi - rk * phi[::-1], [rk]])
    return phi


def unconstrain_coefs(phi: np.ndarray) -> np.ndarray:
    """Inverse of :func:`constrain_coefs` (step-down recursion)."""
    phi = np.asarray(phi, dtype=float).copy()
    p = phi.size
    r = np.zeros(p)
    for k in range(p - 1, -1, -1):
        rk = phi[k]
        if abs(rk) >= 1.0:
            raise NonStationaryParams("coefficients are not stationary")
        r[k] = rk
        if k:
            phi = (phi[:k] + rk * phi[:k][::-1]) / (1.0 - rk * rk)
    return r / np.sqrt(1.0 - r * r)


def _to_params(x: np.ndarray, p: int, q: int) -> Tuple[np.ndarray, np.ndarray]:
    return constrain_coefs(x[:p]), -constrain_coefs(x[p:p + q])


def _to_unconstrained(phi, theta) -> np.ndarray:
    return np.concatenate([unconstrain_coefs(phi), unconstrain_coefs(-np.asarray(theta, float))])


def _shrink_to_region(coefs: np.ndarray, ok) -> np.ndarray:
    c = np.asarray(coefs, dtype=float)
    while c.size and not ok(c, 1e-3):
        c = 0.9 * c
    return c


def _pull_inside(coefs: np.ndarray, ok) -> np.ndarray:
    """Smallest geometric shrink that restores the root margin."""
    c = np.asarray(coefs, dtype=float)
    while c.size and not ok(c, ROOT_MARGIN):
        c = (1.0 - 1e-5) * c
    return c


# -- state space ----------------------------------------------------------

def _state_space(phi, theta):
    p, q = len(phi), len(theta)
    r = max(p, q + 1)
    phi_pad = np.zeros(r)
    phi_pad[:p] = phi
    R = np.zeros(r)
    R[0] = 1.0
    R[1:q + 1] = theta
    T = np.zeros((r, r))
    T[:, 0] = phi_pad
    T[:-1, 1:] = np.eye(r - 1)
    P0 = linalg.solve_discrete_lyapunov(T, np.outer(R, R))
    return T, R, P0


@njit(cache=True)
def _kalman(T, R, P0, Y):
    n, m = Y.shape
    r = T.shape[0]
    a = np.zeros((r, m))
    P = P0.copy()
    RR = np.outer(R, R)
    V = np.empty((n, m))
    F = np.empty(n)
    for t in range(n):
        f = P[0, 0]
        if not f > 0.0:
            f = 1e-300
        F[t] = f
        for j in range(m):
            V[t, j] = Y[t, j] - a[0, j]
        K = (T @ np.ascontiguousarray(P[:, 0])) / f
        a = T @ a
        for j in range(m):
            for i in range(r):
                a[i, j] += K[i] * V[t, j]
        P = T @ P @ T.T + RR - f * np.outer(K, K)
    return V, F, a, P


def _filter(phi, theta, Y):
    T, R, P0 = _state_space(phi, theta)
    Y = np.ascontiguousarray(np.atleast_2d(np.asarray(Y, dtype=float).T).T)
    return _kalman(T, R, P0, Y)


def _check_params(phi, theta):
    if not is_causal(phi) or not is_invertible(theta):
        raise NonStationaryParams("ARMA parameters must be causal and invertible")


def gaussian_loglik(z: Sequence[float], phi=(), theta=(), sigma2: float = 1.0) -> float:
    """Exact Gaussian log-likelihood of a zero-mean ARMA via the innovations."""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    _check_params(phi, theta)
    if not sigma2 > 0:
        raise ValidationError("sigma2 must be positive")
    z = np.asarray(z, dtype=float)
    V, F, _, _ = _filter(phi, theta, z[:, None])
    v = V[:, 0]
    s = sigma2 * F
    return float(-0.5 * np.sum(_LOG2PI + np.log(s) + v * v / s))


def _profile(phi, theta, Y):
    """Concentrated log-likelihood with GLS coefficients; Y = [y | X]."""
    V, F, _, _ = _filter(phi, theta, Y)
    sf = np.sqrt(F)
    Vs = V / sf[:, None]
    n = Y.shape[0]
    if not np.all(np.isfinite(Vs)) or F.min() <= 1e-200:
        # perfectly predictable error process: the likelihood is unbounded
        return -np.inf, np.zeros(Y.shape[1] - 1), 0.0
    if Y.shape[1] > 1:
        coef = np.linalg.lstsq(Vs[:, 1:], Vs[:, 0], rcond=None)[0]
        e = Vs[:, 0] - Vs[:, 1:] @ coef
    else:
        coef = np.zeros(0)
        e = Vs[:, 0]
    sigma2 = float(e @ e) / n
    if sigma2 <= 0:
        return -np.inf, coef, sigma2
    ll = -0.5 * n * (_LOG2PI + np.log(sigma2) + 1.0) - 0.5 * float(np.log(F).sum())
    return ll, coef, sigma2


def css_residuals(z: np.ndarray, phi, theta) -> np.ndarray:
    """Conditional residuals, starting after the first ``p`` observations."""
    p = len(phi)
    w = z[p:].copy()
    for i, ph in enumerate(phi, start=1):
        w -= ph * z[p - i: z.size - i]
    return signal.lfilter([1.0], np.concatenate([[1.0], theta]), w)


def _css_start(z: np.ndarray, p: int, q: int) -> np.ndarray:
    """Unconstrained start from a conditional-sum-of-squares fit."""
    def obj(x):
        phi, theta = _to_params(x, p, q)
        e = css_residuals(z, phi, theta)
        return float(e @ e) / max(e.size, 1)

    x0 = np.zeros(p + q)
    scale = obj(x0) or 1.0
    res = optimize.minimize(lambda x: obj(x) / scale, x0, method="BFGS",
                            options={"maxiter": 200, "gtol": 1e-6})
    x = res.x if np.all(np.isfinite(res.x)) else x0
    return np.clip(x, -7.0, 7.0)


def _fd_grad(f, x: np.ndarray) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(x.size):
        step = FD_STEP * max(abs(x[i]), 1.0)
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


# -- results --------------------------------------------------------------

@dataclass(frozen=True)
class ArmaFit:
    p: int
    q: int
    phi: Tuple[float, ...]
    theta: Tuple[float, ...]
    sigma2: float
    loglik: float
    aicc: float
    nobs: int
    converged: bool = True
    n_iter: int = 0
    degenerate: bool = False

    @property
    def n_params(self) -> int:
        return self.p + self.q + 1

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "phi": list(self.phi), "theta": list(self.theta),
                "sigma2": self.sigma2, "loglik": self.loglik, "aicc": self.aicc,
                "nobs": self.nobs, "converged": self.converged, "n_iter": self.n_iter,
                "degenerate": self.degenerate}

    @classmethod
    def from_dict(cls, d: dict) -> "ArmaFit":
        return cls(int(d["p"]), int(d["q"]), tuple(d["phi"]), tuple(d["theta"]),
                   float(d["sigma2"]), float(d["loglik"]), float(d["aicc"]), int(d["nobs"]),
                   bool(d.get("converged", True)), int(d.get("n_iter", 0)),
                   bool(d.get("degenerate", False)))


@dataclass(frozen=True)
class RegArmaFit:
    coef: np.ndarray
    arma: ArmaFit
    residuals: np.ndarray          # one-step innovations of the error process
    arma_fitted: np.ndarray        # one-step predictions of the error process
    prediction_var: np.ndarray     # innovation variance factors F_t (times sigma2)
    state: np.ndarray              # predicted state mean for time n+1
    css_loglik: float = -np.inf

    @property
    def n_regressors(self) -> int:
        return self.coef.size

    @property
    def std_residuals(self) -> np.ndarray:
        return self.residuals / np.sqrt(self.arma.sigma2 * self.prediction_var)

    @property
    def aicc(self) -> float:
        return self.arma.aicc


def aicc(loglik: float, k: int, n: int) -> float:
    """Bias-corrected AIC: ``-2 loglik + 2kn / (n - k - 1)``."""
    if n <= k + 1:
        raise SampleTooSmall(f"AICc needs n > k + 1 (n={n}, k={k})")
    return -2.0 * loglik + 2.0 * k * n / (n - k - 1)


def _optimize(obj, x0: np.ndarray) -> Tuple[np.ndarray, bool, int]:
    """BFGS on ``obj`` that stops once the objective stalls below the tolerance."""
    if x0.size == 0:
        return x0, True, 0
    hist = [obj(x0)]

    def cb(intermediate_result):
        f = intermediate_result.fun
        if hist[-1] - f < LOGLIK_TOL:
            hist.append(f)
            raise StopIteration
        hist.append(f)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = optimize.minimize(obj, x0, jac=lambda x: _fd_grad(obj, x), method="BFGS",
                                callback=cb, options={"maxiter": MAX_ITER, "gtol": 1e-7})
    converged = bool(res.success) or res.nit < MAX_ITER
    return res.x, converged, int(res.nit)


def fit_reg_arma(y: Sequence[float], X: Optional[np.ndarray], p: int, q: int) -> RegArmaFit:
    """Jointly estimate regression coefficients and zero-mean ARMA(p, q) errors."""
    y = np.asarray(y, dtype=float)
    n = y.size
    X = np.zeros((n, 0)) if X is None else np.asarray(X, dtype=float).reshape(n, -1)
    kx = X.shape[1]
    if p < 0 or q < 0:
        raise ValidationError("orders must be nonnegative")
    if n <= kx + p + q + 1:
        raise SampleTooSmall(f"n={n} too small for {kx} regressors and ARMA({p},{q})")
    coef0 = lstsq_checked(X, y) if kx else np.zeros(0)
    u = y - X @ coef0
    ref = float(np.mean(y * y)) if kx else float(np.mean(u * u))
    ss = float(np.mean(u * u))
    degenerate = False
    if ss <= 1e-12 * ref or ref == 0.0:
        if kx == 0 or p + q > 0 or ref == 0.0:
            raise DegenerateVariance("innovation variance collapsed to zero")
        # regressors reproduce y exactly: keep a tiny positive variance
        degenerate = True

    Y = np.column_stack([y, X])
    if p + q == 0:
        phi = theta = np.zeros(0)
        ll, coef, sigma2 = _profile(phi, theta, Y)
        converged, nit, css_ll = True, 0, ll
        if degenerate:
            # residuals are rounding noise; a fixed floor makes exact fits comparable
            sigma2 = max((1e-14 * np.abs(y).max()) ** 2, np.finfo(float).tiny)
            ll = -0.5 * n * (_LOG2PI + np.log(sigma2) + 1.0)
            css_ll = ll
    else:
        x0 = _css_start(u, p, q)
        phi0, theta0 = _to_params(x0, p, q)
        phi0 = _shrink_to_region(phi0, is_causal)
        theta0 = _shrink_to_region(theta0, is_invertible)
        x0 = _to_unconstrained(phi0, theta0)

        def negll(x):
            ph, th = _to_params(x, p, q)
            val = _profile(ph, th, Y)[0]
            return -val / n if np.isfinite(val) else 1e300

        css_ll = -negll(x0) * n
        # the surface is often multimodal; also start from white noise
        best = (negll(x0), x0, True, 0)
        for start in (x0, np.zeros(p + q)):
            x, ok, it = _optimize(negll, start)
            if negll(x) < best[0]:
                best = (negll(x), x, ok, it)
        _, x, converged, nit = best
        phi, theta = _to_params(x, p, q)
        if not (is_causal(phi, ROOT_MARGIN) and is_invertible(theta, ROOT_MARGIN)):
            logger.warning("ARMA(%d,%d) estimate lies on the stationarity boundary", p, q)
            phi = _pull_inside(phi, is_causal)
            theta = _pull_inside(theta, is_invertible)
        ll, coef, sigma2 = _profile(phi, theta, Y)
        if not converged:
            warnings.warn(f"ARMA({p},{q}) optimizer hit {MAX_ITER} iterations")

    if sigma2 <= 1e-12 * ref and not degenerate:
        raise DegenerateVariance("innovation variance collapsed to zero")
    z = y - X @ coef
    V, F, a, _ = _filter(phi, theta, z[:, None])
    k = kx + p + q + 1
    fit = ArmaFit(p, q, tuple(map(float, phi)), tuple(map(float, theta)), float(sigma2),
                  float(ll), aicc(ll, k, n), n, converged, nit, degenerate)
    return RegArmaFit(np.asarray(coef, dtype=float), fit, V[:, 0].copy(), z - V[:, 0],
                      F.copy(), a[:, 0].copy(), float(css_ll))


def fit_arma(z: Sequence[float], p: int, q: int) -> ArmaFit:
    """Estimate a zero-mean ARMA(p, q): CSS start, then exact maximum likelihood."""
    z = np.asarray(z, dtype=float)
    if z.size <= p + q + 1:
        raise SampleTooSmall(f"n={z.size} too small for ARMA({p},{q})")
    return fit_reg_arma(z, None, p, q).arma


def arma_state(fit: ArmaFit, z: Sequence[float]) -> np.ndarray:
    """Predicted state mean for the step after the last observation of ``z``."""
    _, _, a, _ = _filter(np.array(fit.phi), np.array(fit.theta), np.asarray(z, float)[:, None])
    return a[:, 0].copy()


def psi_weights(phi, theta, count: int) -> np.ndarray:
    """MA(infinity) weights ``psi_0..psi_{count-1}``."""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    psi = np.zeros(count)
    if count:
        psi[0] = 1.0
    for j in range(1, count):
        acc = theta[j - 1] if j <= theta.size else 0.0
        for i in range(1, min(j, phi.size) + 1):
            acc += phi[i - 1] * psi[j - i]
        psi[j] = acc
    return psi


def forecast_arma(fit: ArmaFit, state: Sequence[float], steps: int) -> Tuple[np.ndarray, np.ndarray]:
    """Point forecasts and forecast variances for ``steps`` periods ahead.

    ``state`` is the predicted state mean from :func:`arma_state`; the
    variances accumulate squared psi-weights.
    """
    phi = np.array(fit.phi)
    theta = np.array(fit.theta)
    T, _, _ = _state_space(phi, theta)
    a = np.asarray(state, dtype=float).copy()
    point = np.empty(steps)
    for h in range(steps):
        point[h] = a[0]
        a = T @ a
    psi = psi_weights(phi, theta, steps)
    var = fit.sigma2 * np.cumsum(psi * psi)
    return point, var


@dataclass
class OrderSearch:
    n_harmonics: int
    p: int
    q: int
    fit: RegArmaFit
    table: List[dict] = field(default_factory=list)


def select_orders(w: Sequence[float], period: int, n_max: Optional[int] = None,
                  p_max: int = 2, q_max: int = 2) -> OrderSearch:
    """Exhaustive AICc search over harmonics and ARMA orders on a detrended series."""
    from .seasonal import fourier_design, max_harmonics

    w = np.asarray(w, dtype=float)
    n = w.size
    cap = max_harmonics(period) if period >= 2 else 0
    n_max = cap if n_max is None else min(n_max, cap)
    best = None
    table = []
    for N in range(n_max + 1):
        X = fourier_design(n, period, N) if N else None
        kx = 0 if X is None else X.shape[1]
        for p in range(p_max + 1):
            for q in range(q_max + 1):
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        fit = fit_reg_arma(w, X, p, q)
                except (DegenerateVariance, SampleTooSmall, RankDeficient,
                        NonStationaryParams) as exc:
                    logger.info("skipping N=%d p=%d q=%d: %s", N, p, q, exc)
                    table.append({"N": N, "p": p, "q": q, "aicc": None, "error": str(exc)})
                    continue
                k = kx + p + q + 1
                table.append({"N": N, "p": p, "q": q, "aicc": fit.aicc, "k": k,
                              "converged": fit.arma.converged})
                if not fit.arma.converged:
                    logger.info("N=%d p=%d q=%d did not converge; skipped", N, p, q)
                    continue
                key = (fit.aicc, k, N, p, q)
                if best is None or key < best[0]:
                    best = (key, N, p, q, fit)
    if best is None:
        raise DegenerateVariance("no (N, p, q) combination could be fitted")
    _, N, p, q, fit = best
    return OrderSearch(N, p, q, fit, table)


# -- inference ----------------------------------------------------------

def full_loglik(y: np.ndarray, X: np.ndarray, coef, phi, theta, sigma2) -> float:
    z = y - X @ np.asarray(coef, dtype=float) if X.shape[1] else y
    return gaussian_loglik(z, phi, theta, sigma2)


def hessian_covariance(y: Sequence[float], X: Optional[np.ndarray], fit: RegArmaFit) -> np.ndarray:
    """Inverse negative numerical Hessian over ``[coef, phi, theta, sigma2]``."""
    y = np.asarray(y, dtype=float)
    n = y.size
    X = np.zeros((n, 0)) if X is None else np.asarray(X, dtype=float).reshape(n, -1)
    kx, p, q = X.shape[1], fit.arma.p, fit.arma.q
    x0 = np.concatenate([fit.coef, fit.arma.phi, fit.arma.theta, [fit.arma.sigma2]])
    steps = np.empty_like(x0)
    steps[:-1] = 1e-4 * np.maximum(np.abs(x0[:-1]), 1e-2)
    steps[-1] = 1e-3 * x0[-1]

    def ll(x):
        try:
            return full_loglik(y, X, x[:kx], x[kx:kx + p], x[kx + p:kx + p + q], x[-1])
        except NonStationaryParams:
            return np.nan

    d = x0.size
    H = np.empty((d, d))
    f0 = ll(x0)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = steps[i]
        H[i, i] = (ll(x0 + ei) - 2 * f0 + ll(x0 - ei)) / steps[i] ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = steps[j]
            H[i, j] = H[j, i] = (ll(x0 + ei + ej) - ll(x0 + ei - ej) - ll(x0 - ei + ej)
                                 + ll(x0 - ei - ej)) / (4 * steps[i] * steps[j])
    try:
        return np.linalg.inv(-H)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(-H)
