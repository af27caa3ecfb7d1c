"""SROC curve from a bivariate fit via the Rutter-Gatsonis (HSROC) parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dtameta.bivariate import BivariateFit
from dtameta.exceptions import DomainError
from dtameta.numerics import Mat2, chisq_quantile, invlogit, logit, psd_root

ELLIPSE_POINTS = 256


@dataclass(frozen=True)
class HSROCParams:
    lam: float  # accuracy
    beta: float  # shape / asymmetry
    theta: float  # threshold
    tau_theta2: float
    tau_alpha2: float


def map_hsroc(fit: BivariateFit) -> HSROCParams:
    sd1, sd2 = fit.sd
    if sd1 <= 0.0 or sd2 <= 0.0:
        raise DomainError(
            "SROC mapping needs both between-study SDs > 0; the fit is on the variance boundary"
        )
    return hsroc_from_moments(fit.mu, fit.sigma)


def hsroc_from_moments(mu, sigma: Mat2) -> HSROCParams:
    sd1, sd2 = math.sqrt(sigma.a11), math.sqrt(sigma.a22)
    if sd1 <= 0.0 or sd2 <= 0.0:
        raise DomainError("SROC mapping needs both between-study SDs > 0")
    a = math.sqrt(sd2 / sd1)
    s12 = sigma.a12
    return HSROCParams(
        lam=mu[0] * a - mu[1] / a,
        beta=math.log(sd2 / sd1),
        theta=0.5 * (mu[0] * a + mu[1] / a),
        tau_theta2=0.5 * (sd1 * sd2 + s12),
        tau_alpha2=2.0 * (sd1 * sd2 - s12),
    )


def moments_from_hsroc(p: HSROCParams) -> tuple[tuple[float, float], Mat2]:
    """Inverse of :func:`hsroc_from_moments`: ``(mu, sigma)``."""
    a = math.exp(p.beta / 2.0)
    mu1 = (p.theta + p.lam / 2.0) / a
    mu2 = (p.theta - p.lam / 2.0) * a
    sd12 = p.tau_theta2 + p.tau_alpha2 / 4.0
    s12 = p.tau_theta2 - p.tau_alpha2 / 4.0
    return (mu1, mu2), Mat2.sym(sd12 * math.exp(-p.beta), s12, sd12 * math.exp(p.beta))


def sroc_sens(fpr, params: HSROCParams):
    """Sensitivity on the SROC curve at the given false positive rate(s)."""
    return invlogit(
        params.lam * math.exp(-params.beta / 2.0) + math.exp(-params.beta) * logit(fpr)
    )


def _integrate(params, lo, hi, grid):
    # interior points avoid the logit singularity at 0 and 1; the curve tends
    # to 0 at fpr -> 0 and to 1 at fpr -> 1
    if lo == 0.0 and hi == 1.0:
        x = (np.arange(grid) + 0.5) / grid
    else:
        x = np.linspace(lo, hi, grid)
        x = x[(x > 0.0) & (x < 1.0)]
    sens = sroc_sens(x, params)
    if lo == 0.0:
        x, sens = np.concatenate([[0.0], x]), np.concatenate([[0.0], sens])
    if hi == 1.0:
        x, sens = np.concatenate([x, [1.0]]), np.concatenate([sens, [1.0]])
    return float(0.5 * np.sum(np.diff(x) * (sens[1:] + sens[:-1])))


def auc(params: HSROCParams, grid: int = 5000) -> float:
    return _integrate(params, 0.0, 1.0, grid)


def partial_auc(params: HSROCParams, fpr_lo: float, fpr_hi: float, grid: int = 5000) -> float:
    """Area under the SROC over ``[fpr_lo, fpr_hi]`` divided by the width."""
    if not 0.0 <= fpr_lo < fpr_hi <= 1.0:
        raise DomainError(f"invalid FPR range ({fpr_lo}, {fpr_hi})")
    return _integrate(params, fpr_lo, fpr_hi, grid) / (fpr_hi - fpr_lo)


@dataclass(frozen=True)
class SROCCurve:
    fpr: np.ndarray
    sens: np.ndarray
    auc: float
    pauc: float
    fpr_range: tuple[float, float]
    params: HSROCParams


def sroc_curve(
    fit: BivariateFit, fpr_range: tuple[float, float], grid: int = 5000, plot_points: int = 200
) -> SROCCurve:
    """AUC, partial AUC over ``fpr_range`` and a curve for plotting."""
    params = map_hsroc(fit)
    fpr = (np.arange(plot_points) + 0.5) / plot_points
    return SROCCurve(
        fpr=fpr,
        sens=sroc_sens(fpr, params),
        auc=auc(params, grid),
        pauc=partial_auc(params, fpr_range[0], fpr_range[1], grid),
        fpr_range=(float(fpr_range[0]), float(fpr_range[1])),
        params=params,
    )


@dataclass(frozen=True)
class Region:
    """Ellipse in logit space and its image on the (FPR, sensitivity) axes."""

    logit_sens: np.ndarray
    logit_fpr: np.ndarray
    level: float

    @property
    def sens(self) -> np.ndarray:
        return invlogit(self.logit_sens)

    @property
    def fpr(self) -> np.ndarray:
        return invlogit(self.logit_fpr)


def _ellipse(mu, cov: Mat2, level, points):
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    r = math.sqrt(chisq_quantile(level, 2))
    root = psd_root(cov)
    t = 2.0 * math.pi * np.arange(points) / points
    u1, u2 = r * np.cos(t), r * np.sin(t)
    return Region(
        logit_sens=mu[0] + root.a11 * u1,
        logit_fpr=mu[1] + root.a21 * u1 + root.a22 * u2,
        level=level,
    )


def confidence_region(fit: BivariateFit, level: float = 0.95, points: int = ELLIPSE_POINTS) -> Region:
    return _ellipse(fit.mu, fit.cov_mu, level, points)


def prediction_region(fit: BivariateFit, level: float = 0.95, points: int = ELLIPSE_POINTS) -> Region:
    return _ellipse(fit.mu, fit.cov_mu + fit.sigma, level, points)
