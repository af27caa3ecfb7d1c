"""Bivariate (Reitsma) random-effects model fitted by REML.

Each study contributes ``y_i ~ N2(mu, S_i + Sigma)`` with ``y_i`` the logit
sensitivity and logit false positive rate. ``Sigma`` is optimized over
log-Cholesky coordinates ``(ln L11, L21, ln L22)``, which keeps it PSD.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from dtameta.exceptions import DomainError, FitError
from dtameta.ingest import TransformedStudy, stack
from dtameta.numerics import Mat2, invlogit, nelder_mead, norm_quantile, norm_sf

LOG_2PI = math.log(2.0 * math.pi)
N_PARAMS = 5
BOUNDARY_VAR = 1e-8
# floor on the log-Cholesky diagonal; exp(2 * -12) ~ 4e-11 is reported as a boundary
LOG_DIAG_FLOOR = -12.0

# The REML log-likelihood is defined up to 0.5 * ln det(X'X), which is ln N for
# the two-intercept design. "with-xtx" includes the term, "without-xtx" drops it.
CONVENTIONS = ("with-xtx", "without-xtx")
DEFAULT_CONVENTION = "without-xtx"


@dataclass(frozen=True)
class BivariateFit:
    mu: tuple[float, float]
    cov_mu: Mat2
    sigma: Mat2
    loglik: float
    n: int
    converged: bool
    boundary: bool = False
    convention: str = DEFAULT_CONVENTION
    nit: int = 0
    theta: tuple[float, float, float] = field(default=(0.0, 0.0, 0.0), repr=False)

    @property
    def sd(self) -> tuple[float, float]:
        return (math.sqrt(self.sigma.a11), math.sqrt(self.sigma.a22))

    @property
    def rho(self) -> float:
        sd1, sd2 = self.sd
        if sd1 > 0 and sd2 > 0:
            return self.sigma.a12 / (sd1 * sd2)
        return 0.0

    @property
    def se(self) -> tuple[float, float]:
        return (math.sqrt(self.cov_mu.a11), math.sqrt(self.cov_mu.a22))

    @property
    def z(self) -> tuple[float, float]:
        return (self.mu[0] / self.se[0], self.mu[1] / self.se[1])

    @property
    def aic(self) -> float:
        return -2.0 * self.loglik + 2.0 * N_PARAMS

    @property
    def bic(self) -> float:
        # 2N observations: one per outcome per study
        return -2.0 * self.loglik + N_PARAMS * math.log(2 * self.n)


def sigma_from_theta(theta) -> tuple[float, float, float]:
    """``(s11, s12, s22)`` from log-Cholesky coordinates."""
    l11 = math.exp(max(float(theta[0]), LOG_DIAG_FLOOR))
    l21 = float(theta[1])
    l22 = math.exp(max(float(theta[2]), LOG_DIAG_FLOOR))
    return (l11 * l11, l11 * l21, l21 * l21 + l22 * l22)


def theta_from_sigma(sigma: Mat2) -> tuple[float, float, float]:
    if sigma.a11 <= 0.0:
        raise DomainError("log-Cholesky coordinates need sigma11 > 0")
    l11 = math.sqrt(sigma.a11)
    l21 = sigma.a12 / l11
    l22sq = sigma.a22 - l21 * l21
    if l22sq <= 0.0:
        raise DomainError("log-Cholesky coordinates need a positive definite sigma")
    return (math.log(l11), l21, 0.5 * math.log(l22sq))


class _Profile:
    """Per-data-set cache for repeated GLS/REML evaluations.

    Plain float loops beat numpy here: N is small and the objective is called
    hundreds of times per fit.
    """

    def __init__(self, y, S):
        y = np.asarray(y, dtype=float)
        S = np.asarray(S, dtype=float)
        self.n = len(y)
        self.rows = [
            (float(S[i, 0, 0]), float(S[i, 0, 1]), float(S[i, 1, 1]), float(y[i, 0]), float(y[i, 1]))
            for i in range(self.n)
        ]

    def parts(self, s11, s12, s22):
        """GLS pieces at ``Sigma = [[s11, s12], [s12, s22]]``.

        Returns ``(mu, (c11, c12, c22), sum_logdet_v, logdet_sumw, quad)`` where
        ``c`` is ``(sum_i W_i)^{-1}`` and ``quad`` the weighted residual sum.
        """
        sw11 = sw12 = sw22 = g1 = g2 = ywy = logdet_v = 0.0
        log = math.log
        for sa, sb, sd, u, v in self.rows:
            a = sa + s11
            b = sb + s12
            d = sd + s22
            det = a * d - b * b
            if not det > 0.0:
                raise FitError("a study covariance S_i + Sigma is not positive definite")
            inv = 1.0 / det
            sw11 += d * inv
            sw12 -= b * inv
            sw22 += a * inv
            g1 += (d * u - b * v) * inv
            g2 += (a * v - b * u) * inv
            ywy += ((d * u - 2.0 * b * v) * u + a * v * v) * inv
            logdet_v += log(det)
        dsw = sw11 * sw22 - sw12 * sw12
        if not dsw > 0.0:
            raise FitError(f"summed GLS weight matrix is singular (det={dsw:.3e})")
        c11 = sw22 / dsw
        c12 = -sw12 / dsw
        c22 = sw11 / dsw
        mu1 = c11 * g1 + c12 * g2
        mu2 = c12 * g1 + c22 * g2
        # y'Wy - g'mu is the weighted residual sum of squares at the GLS mean
        quad = max(ywy - (mu1 * g1 + mu2 * g2), 0.0)
        return (mu1, mu2), (c11, c12, c22), logdet_v, log(dsw), quad

    def reml(self, s11, s12, s22, convention):
        mu, c, logdet_v, logdet_sw, quad = self.parts(s11, s12, s22)
        ll = -0.5 * (logdet_v + logdet_sw + quad + (2 * self.n - 2) * LOG_2PI)
        if convention == "with-xtx":
            ll += math.log(self.n)
        return ll, mu, c


def _as_arrays(studies):
    if isinstance(studies, tuple) and len(studies) == 2:
        return np.asarray(studies[0], float), np.asarray(studies[1], float)
    return stack(studies)


def gls_profile(sigma: Mat2, studies) -> tuple[np.ndarray, Mat2]:
    """GLS estimate of the pooled means for fixed ``sigma`` and its covariance."""
    y, S = _as_arrays(studies)
    if len(y) < 1:
        raise FitError("no studies")
    mu, c, *_ = _Profile(y, S).parts(sigma.a11, sigma.a12, sigma.a22)
    return np.array(mu), Mat2.sym(*c)


def reml_loglik(sigma: Mat2, studies, convention: str = DEFAULT_CONVENTION) -> float:
    """Restricted log-likelihood of ``sigma`` with the means profiled out."""
    if convention not in CONVENTIONS:
        raise DomainError(f"unknown loglik convention {convention!r}")
    if not sigma.is_psd:
        raise DomainError("sigma must be positive semidefinite")
    y, S = _as_arrays(studies)
    return _Profile(y, S).reml(sigma.a11, sigma.a12, sigma.a22, convention)[0]


def _start(y, S):
    v1 = max(float(np.var(y[:, 0], ddof=1) - S[:, 0, 0].mean()), 1e-4)
    v2 = max(float(np.var(y[:, 1], ddof=1) - S[:, 1, 1].mean()), 1e-4)
    return np.array([0.5 * math.log(v1), 0.0, 0.5 * math.log(v2)])


def fit_arrays(y, S, convention=DEFAULT_CONVENTION, tol=1e-10, max_iter=5000, warn=True):
    """Fit from stacked arrays; see :func:`fit_reitsma`."""
    if convention not in CONVENTIONS:
        raise DomainError(f"unknown loglik convention {convention!r}")
    n = len(y)
    if n < 2:
        raise FitError(f"at least 2 studies are required, got {n}")

    prof = _Profile(y, S)

    def objective(theta):
        s11, s12, s22 = sigma_from_theta(theta)
        try:
            return -prof.reml(s11, s12, s22, convention)[0]
        except FitError:
            return math.inf

    res = nelder_mead(objective, _start(y, S), tol=tol, max_iter=max_iter, step=0.3)
    theta = np.maximum(res.x, [LOG_DIAG_FLOOR, -np.inf, LOG_DIAG_FLOOR])
    s11, s12, s22 = sigma_from_theta(theta)
    boundary = False
    if s11 < BOUNDARY_VAR or s22 < BOUNDARY_VAR:
        boundary = True
        s11 = 0.0 if s11 < BOUNDARY_VAR else s11
        s22 = 0.0 if s22 < BOUNDARY_VAR else s22
        s12 = 0.0
    ll, mu, c = prof.reml(s11, s12, s22, convention)
    if warn and not res.converged:
        warnings.warn(f"REML optimizer did not converge after {res.nit} iterations", stacklevel=3)
    return BivariateFit(
        mu=(float(mu[0]), float(mu[1])),
        cov_mu=Mat2.sym(*map(float, c)),
        sigma=Mat2.sym(s11, s12, s22),
        loglik=float(ll),
        n=n,
        converged=res.converged,
        boundary=boundary,
        convention=convention,
        nit=res.nit,
        theta=tuple(float(t) for t in theta),
    )


def fit_reitsma(
    studies, convention: str = DEFAULT_CONVENTION, tol: float = 1e-10, max_iter: int = 5000
) -> BivariateFit:
    """Fit the bivariate random-effects model by REML.

    Parameters
    ----------
    studies : list of TransformedStudy, or a ``(y, S)`` pair of arrays
    convention : one of ``CONVENTIONS``; only shifts ``loglik``/AIC/BIC.
    tol, max_iter : Nelder-Mead settings.

    Returns a fit whose ``converged`` flag is False (with a warning) when the
    optimizer hit ``max_iter``.
    """
    y, S = _as_arrays(studies)
    return fit_arrays(y, S, convention, tol, max_iter)


@dataclass(frozen=True)
class SummaryRow:
    name: str
    estimate: float
    se: float | None
    z: float | None
    p: float | None
    ci_lb: float
    ci_ub: float


def summary_rows(fit: BivariateFit, level: float = 0.95) -> list[SummaryRow]:
    """Coefficient table: logit-scale rows then back-transformed rows."""
    q = norm_quantile(0.5 + level / 2.0)
    rows = []
    for name, m, se in zip(("tsens", "tfpr"), fit.mu, fit.se):
        z = m / se
        rows.append(SummaryRow(name, m, se, z, 2.0 * norm_sf(abs(z)), m - q * se, m + q * se))
    for name, r in zip(("sensitivity", "false pos. rate"), list(rows)):
        rows.append(
            SummaryRow(name, invlogit(r.estimate), None, None, None, invlogit(r.ci_lb), invlogit(r.ci_ub))
        )
    return rows


def summarize(fit: BivariateFit, level: float = 0.95) -> str:
    rows = summary_rows(fit, level)
    out = [
        "Bivariate diagnostic random-effects meta-analysis",
        "Estimation method: REML",
        "",
        "Fixed-effects coefficients",
        f"{'':18s}{'Estimate':>9s}{'Std. Error':>11s}{'z':>8s}{'Pr(>|z|)':>9s}"
        f"{'ci.lb':>8s}{'ci.ub':>8s}",
    ]
    for r in rows:
        if r.se is None:
            out.append(
                f"{r.name:18s}{r.estimate:9.3f}{'-':>11s}{'-':>8s}{'-':>9s}"
                f"{r.ci_lb:8.3f}{r.ci_ub:8.3f}"
            )
        else:
            out.append(
                f"{r.name:18s}{r.estimate:9.3f}{r.se:11.3f}{r.z:8.3f}{r.p:9.3f}"
                f"{r.ci_lb:8.3f}{r.ci_ub:8.3f}"
            )
    sd1, sd2 = fit.sd
    out += [
        "",
        "Variance components: between-studies Std. Dev and correlation matrix",
        f"{'':6s}{'Std. Dev':>9s}{'tsens':>7s}{'tfpr':>7s}",
        f"{'tsens':6s}{sd1:9.3f}{1.0:7.3f}{'.':>7s}",
        f"{'tfpr':6s}{sd2:9.3f}{fit.rho:7.3f}{1.0:7.3f}",
        "",
        f"{'logLik':>8s}{'AIC':>9s}{'BIC':>9s}",
        f"{fit.loglik:8.3f}{fit.aic:9.3f}{fit.bic:9.3f}",
    ]
    if fit.boundary:
        out.append("note: a between-study variance is at the zero boundary")
    if not fit.converged:
        out.append("warning: optimizer did not converge")
    return "\n".join(out)
