"""Generalized Egger tests for the bivariate model.

MSSET2 extends the null mean model ``E[y_ij] = b0_j`` to
``E[y_ij] = b0_j + b_j * s_ij`` where ``s_ij`` is the study's standard error
for outcome ``j``, and tests ``b_1 = b_2 = 0`` with the between-study
covariance fixed at its REML estimate under the null. With the covariance
fixed the model is linear Gaussian, so the efficient score statistic equals
the GLS Wald statistic of the slope coefficients, which is what is computed.

MSSET3 replaces the chi-square(2) reference distribution with a parametric
bootstrap: synthetic data sets are drawn from the fitted null model and the
whole procedure, REML refit included, is rerun on each.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from dtameta.bivariate import DEFAULT_CONVENTION, BivariateFit, _as_arrays, fit_arrays
from dtameta.exceptions import DomainError, FitError, TestError
from dtameta.numerics import RngStream, chisq_sf

log = logging.getLogger(__name__)

COVARIATES = ("within", "total")
MIN_B = 100


@dataclass(frozen=True)
class PBTestResult:
    method: str
    T: float
    P: float
    b0: tuple[float, float]
    covariate: str = "within"
    boot_stats: tuple[float, ...] | None = None
    B: int = 0
    seed: int | None = None
    n_failed: int = 0


def se_covariate(S, sigma=None, kind: str = "within") -> np.ndarray:
    """Standard-error covariate ``s_ij``, shape (N, k).

    ``within`` uses ``sqrt(S_i,jj)``; ``total`` uses ``sqrt(S_i,jj + Sigma_jj)``.
    """
    d = np.diagonal(np.asarray(S, dtype=float), axis1=1, axis2=2)
    if kind == "within":
        return np.sqrt(d)
    if kind == "total":
        return np.sqrt(d + np.diag(np.asarray(sigma, dtype=float)))
    raise DomainError(f"unknown SE covariate {kind!r}; choose from {COVARIATES}")


def score_statistic(y, S, sigma, s) -> tuple[float, np.ndarray, np.ndarray]:
    """Efficient score statistic for zero SE slopes at fixed ``sigma``.

    Works for any number of outcomes ``k``: ``y`` (N, k), ``S`` (N, k, k),
    ``sigma`` (k, k), ``s`` (N, k). Returns ``(T, coef, cov)`` where ``coef``
    interleaves ``(intercept_j, slope_j)`` per outcome.
    """
    y = np.asarray(y, dtype=float)
    S = np.asarray(S, dtype=float)
    s = np.asarray(s, dtype=float)
    n, k = y.shape
    if np.any(np.ptp(s, axis=0) == 0.0):
        raise TestError("an SE covariate is constant across studies; extended design is singular")
    V = S + np.asarray(sigma, dtype=float)
    try:
        W = np.linalg.inv(V)
    except np.linalg.LinAlgError:
        raise TestError("a study covariance S_i + Sigma is singular") from None
    X = np.zeros((n, k, 2 * k))
    for j in range(k):
        X[:, j, 2 * j] = 1.0
        X[:, j, 2 * j + 1] = s[:, j]
    xtwx = np.einsum("nja,njl,nlb->ab", X, W, X)
    xtwy = np.einsum("nja,njl,nl->a", X, W, y)
    if np.linalg.cond(xtwx) > 1e12:
        raise TestError("extended GLS design is numerically singular")
    cov = np.linalg.inv(xtwx)
    coef = cov @ xtwy
    idx = np.arange(1, 2 * k, 2)
    b = coef[idx]
    T = float(b @ np.linalg.solve(cov[np.ix_(idx, idx)], b))
    return max(T, 0.0), coef, cov


def _msset2_arrays(y, S, covariate, convention, fit=None):
    if fit is None:
        fit = fit_arrays(y, S, convention, warn=False)
    if not fit.converged:
        raise FitError("null-model REML fit did not converge")
    sigma = fit.sigma.to_array()
    T, _, _ = score_statistic(y, S, sigma, se_covariate(S, sigma, covariate))
    return T, fit


def msset2(
    studies,
    covariate: str = "within",
    convention: str = DEFAULT_CONVENTION,
    fit: BivariateFit | None = None,
) -> PBTestResult:
    """Efficient score test (chi-square, 2 df) for funnel asymmetry in both outcomes.

    ``fit`` may pass in an existing null-model fit of the same studies.
    """
    if covariate not in COVARIATES:
        raise DomainError(f"unknown SE covariate {covariate!r}; choose from {COVARIATES}")
    y, S = _as_arrays(studies)
    if len(y) < 4:
        raise TestError(f"MSSET2 needs at least 4 studies, got {len(y)}")
    T, fit = _msset2_arrays(y, S, covariate, convention, fit)
    return PBTestResult("MSSET2", T, chisq_sf(T, 2), fit.mu, covariate)


def simulate_null(fit: BivariateFit, S, rng) -> np.ndarray:
    """Draw ``y*_i ~ N2(mu, S_i + Sigma)`` for every study; shape (N, 2)."""
    if isinstance(rng, RngStream):
        rng = rng.generator()
    S = np.asarray(S, dtype=float)
    V = S + fit.sigma.to_array()
    a, b, d = V[:, 0, 0], V[:, 0, 1], V[:, 1, 1]
    if np.any(a < 0) or np.any(d < 0) or np.any(a * d - b * b < -1e-12):
        raise DomainError("study covariance is not PSD")
    l11 = np.sqrt(a)
    l21 = np.divide(b, l11, out=np.zeros_like(b), where=l11 > 0)
    l22 = np.sqrt(np.maximum(d - l21 * l21, 0.0))
    z = rng.standard_normal((len(S), 2))
    out = np.empty_like(z)
    out[:, 0] = fit.mu[0] + l11 * z[:, 0]
    out[:, 1] = fit.mu[1] + l21 * z[:, 0] + l22 * z[:, 1]
    return out


def bootstrap_replicate(
    fit: BivariateFit, studies, rng, covariate: str = "within", convention=DEFAULT_CONVENTION
) -> float | None:
    """One parametric bootstrap statistic ``T*``; ``None`` if the replicate fails.

    Within-study covariances stay fixed; the null model is refitted by REML.
    """
    _, S = _as_arrays(studies)
    y_star = simulate_null(fit, S, rng)
    try:
        T, _ = _msset2_arrays(y_star, S, covariate, convention)
    except (FitError, TestError) as exc:
        log.debug("bootstrap replicate failed: %s", exc)
        return None
    return T


def bootstrap_pvalue(T: float, boot_stats) -> float:
    boot = np.asarray(boot_stats, dtype=float)
    return (int(np.count_nonzero(boot >= T)) + 1) / (len(boot) + 1)


def _replicate_chunk(args):
    fit, S, seed, indices, covariate, convention = args
    y_dummy = np.zeros((len(S), 2))
    return [
        bootstrap_replicate(fit, (y_dummy, S), RngStream(seed, b), covariate, convention)
        for b in indices
    ]


def msset3(
    studies,
    B: int = 2000,
    seed: int = 1,
    covariate: str = "within",
    convention: str = DEFAULT_CONVENTION,
    workers: int = 1,
) -> PBTestResult:
    """Parametric bootstrap version of :func:`msset2`.

    Replicate ``b`` draws from ``RngStream(seed, b)``, so results do not depend
    on ``workers``. Failed replicates are dropped and counted in ``n_failed``;
    ``P = (#{T* >= T} + 1) / (B - n_failed + 1)``.
    """
    if B < MIN_B:
        raise DomainError(f"B must be at least {MIN_B}, got {B}")
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")
    y, S = _as_arrays(studies)
    fit = fit_arrays(y, S, convention, warn=False)
    observed = msset2((y, S), covariate, convention, fit=fit)

    if workers == 1:
        stats = _replicate_chunk((fit, S, seed, range(B), covariate, convention))
    else:
        chunks = np.array_split(np.arange(B), workers * 4)
        jobs = [(fit, S, seed, list(map(int, c)), covariate, convention) for c in chunks]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            stats = [t for part in pool.map(_replicate_chunk, jobs) for t in part]

    boot = tuple(t for t in stats if t is not None)
    n_failed = B - len(boot)
    if not boot:
        raise TestError("all bootstrap replicates failed")
    if n_failed > 0.01 * B:
        warnings.warn(f"{n_failed} of {B} bootstrap replicates failed and were dropped", stacklevel=2)
    return PBTestResult(
        "MSSET3",
        observed.T,
        bootstrap_pvalue(observed.T, boot),
        observed.b0,
        covariate,
        boot_stats=boot,
        B=B,
        seed=seed,
        n_failed=n_failed,
    )
