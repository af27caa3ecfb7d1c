"""Univariate funnel-plot machinery: REML random-effects center and Egger's test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dtameta.exceptions import FitError, TestError
from dtameta.numerics import norm_quantile, t_quantile, t_sf

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class UniFit:
    mu: float
    tau2: float


@dataclass(frozen=True)
class EggerResult:
    """Egger regression test, weighted regression with multiplicative dispersion."""

    slope: float
    slope_se: float
    limit_b: float
    limit_se: float
    t: float
    df: int
    p: float
    ci_lb: float
    ci_ub: float
    phi: float


def _uni_reml(tau2, y, v):
    w = 1.0 / (v + tau2)
    sw = w.sum()
    mu = (w * y).sum() / sw
    return -0.5 * (np.log(v + tau2).sum() + math.log(sw) + (w * (y - mu) ** 2).sum()), mu


def golden_max(f, lo, hi, tol=1e-10, max_iter=500):
    """Golden-section search for the maximum of a unimodal ``f`` on ``[lo, hi]``."""
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    # the maximum may sit on an end point of the bracket
    return max((lo, x, hi), key=f)


def uni_reml_fit(y, v, tol: float = 1e-10) -> UniFit:
    """Random-effects REML fit of ``y_i ~ N(mu, v_i + tau2)``."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    if len(y) < 2:
        raise FitError(f"at least 2 studies are required, got {len(y)}")
    if np.any(v <= 0):
        raise FitError("within-study variances must be positive")
    hi = 10.0 * float(np.var(y, ddof=1))
    tau2 = 0.0 if hi <= 0.0 else golden_max(lambda t: _uni_reml(t, y, v)[0], 0.0, hi, tol)
    return UniFit(mu=float(_uni_reml(tau2, y, v)[1]), tau2=float(tau2))


def egger_test(y, v, level: float = 0.95) -> EggerResult:
    """Regress ``y`` on its standard error with weights ``1/v``.

    The residual scale ``phi`` is estimated (multiplicative dispersion) and
    inference uses t quantiles with ``N - 2`` degrees of freedom.
    """
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    n = len(y)
    if n < 3:
        raise TestError(f"Egger test needs at least 3 studies, got {n}")
    if np.any(v <= 0):
        raise TestError("within-study variances must be positive")
    se = np.sqrt(v)
    w = 1.0 / v
    X = np.column_stack([np.ones(n), se])
    xtwx = X.T @ (w[:, None] * X)
    det = np.linalg.det(xtwx)
    if np.ptp(se) == 0.0 or abs(det) < 1e-12 * xtwx[0, 0] * xtwx[1, 1]:
        raise TestError("standard errors are constant; Egger regression design is singular")
    xtwx_inv = np.linalg.inv(xtwx)
    beta = xtwx_inv @ (X.T @ (w * y))
    resid = y - X @ beta
    df = n - 2
    phi = float((w * resid**2).sum() / df)
    # relative to the weighted spread of y, so roundoff does not pass as signal
    if phi <= 1e-24 * float((w * (y - y.mean()) ** 2).sum() + (w * y**2).sum()):
        raise TestError("regression fits the data exactly; t statistic undefined")
    cov = phi * xtwx_inv
    b0, b1 = float(beta[0]), float(beta[1])
    se0, se1 = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])
    t = b1 / se1
    q = t_quantile(0.5 + level / 2.0, df)
    return EggerResult(
        slope=b1,
        slope_se=se1,
        limit_b=b0,
        limit_se=se0,
        t=t,
        df=df,
        p=2.0 * t_sf(abs(t), df),
        ci_lb=b0 - q * se0,
        ci_ub=b0 + q * se0,
        phi=phi,
    )


@dataclass(frozen=True)
class FunnelSeries:
    y: np.ndarray
    se: np.ndarray
    center: float
    contour_se: np.ndarray
    contour_lo: np.ndarray
    contour_hi: np.ndarray


def funnel_series(y, v, fit: UniFit, level: float = 0.95, points: int = 101) -> FunnelSeries:
    """Points, center line and pseudo-confidence contour for a funnel plot.

    The contour spans ``se`` from 0 to the largest observed standard error;
    plotting code is expected to draw the se axis inverted (0 at the top).
    """
    y = np.asarray(y, dtype=float)
    se = np.sqrt(np.asarray(v, dtype=float))
    q = norm_quantile(0.5 + level / 2.0)
    grid = np.linspace(0.0, float(se.max()) if len(se) else 1.0, points)
    return FunnelSeries(y, se, fit.mu, grid, fit.mu - q * grid, fit.mu + q * grid)
