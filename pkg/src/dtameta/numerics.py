"""Small numerical kernel: 2x2 algebra, distributions, Nelder-Mead, RNG streams."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import special

from dtameta.exceptions import DomainError, SingularMatrixError

DET_EPS = 1e-14
PSD_EPS = 1e-12


def logit(p):
    """Log-odds ``ln(p / (1 - p))``; works elementwise on arrays."""
    arr = np.asarray(p, dtype=float)
    if np.any((arr <= 0.0) | (arr >= 1.0)) or np.any(np.isnan(arr)):
        raise DomainError(f"logit requires 0 < p < 1, got {p!r}")
    out = np.log(arr) - np.log1p(-arr)
    return float(out) if out.ndim == 0 else out


def invlogit(x):
    out = special.expit(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Mat2:
    """A 2x2 real matrix stored row-major."""

    a11: float
    a12: float
    a21: float
    a22: float

    @classmethod
    def from_array(cls, a) -> "Mat2":
        a = np.asarray(a, dtype=float)
        if a.shape != (2, 2):
            raise DomainError(f"expected a 2x2 array, got shape {a.shape}")
        return cls(float(a[0, 0]), float(a[0, 1]), float(a[1, 0]), float(a[1, 1]))

    @classmethod
    def sym(cls, a11: float, a12: float, a22: float) -> "Mat2":
        return cls(a11, a12, a12, a22)

    @classmethod
    def diag(cls, a11: float, a22: float) -> "Mat2":
        return cls(a11, 0.0, 0.0, a22)

    @classmethod
    def identity(cls) -> "Mat2":
        return cls(1.0, 0.0, 0.0, 1.0)

    def to_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def is_symmetric(self) -> bool:
        return self.a12 == self.a21

    @property
    def is_psd(self) -> bool:
        return (
            self.a11 >= 0.0
            and self.a22 >= 0.0
            and self.a11 * self.a22 - self.a12 * self.a21 >= -PSD_EPS
        )

    def __add__(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a11 + other.a11, self.a12 + other.a12, self.a21 + other.a21, self.a22 + other.a22
        )

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a11 * other.a11 + self.a12 * other.a21,
            self.a11 * other.a12 + self.a12 * other.a22,
            self.a21 * other.a11 + self.a22 * other.a21,
            self.a21 * other.a12 + self.a22 * other.a22,
        )

    def scale(self, c: float) -> "Mat2":
        return Mat2(c * self.a11, c * self.a12, c * self.a21, c * self.a22)

    @property
    def T(self) -> "Mat2":
        return Mat2(self.a11, self.a21, self.a12, self.a22)


def mat2_det(m: Mat2) -> float:
    return m.a11 * m.a22 - m.a12 * m.a21


def mat2_inv(m: Mat2) -> Mat2:
    det = mat2_det(m)
    if abs(det) <= DET_EPS:
        raise SingularMatrixError(det)
    return Mat2(m.a22 / det, -m.a12 / det, -m.a21 / det, m.a11 / det)


def mat2_chol(m: Mat2) -> Mat2:
    """Lower Cholesky factor ``L`` with ``L @ L.T == m``."""
    det = mat2_det(m)
    if det <= DET_EPS or m.a11 <= 0.0:
        raise SingularMatrixError(det, f"Cholesky needs a positive definite matrix (det={det:.3e})")
    l11 = math.sqrt(m.a11)
    l21 = m.a21 / l11
    l22 = math.sqrt(det / m.a11)
    return Mat2(l11, 0.0, l21, l22)


def psd_root(m: Mat2) -> Mat2:
    """Lower-triangular square root of a PSD matrix; tolerates singular input."""
    if not m.is_psd:
        raise DomainError(f"matrix is not positive semidefinite: {m}")
    if m.a11 > 0.0:
        l11 = math.sqrt(m.a11)
        l21 = m.a21 / l11
        return Mat2(l11, 0.0, l21, math.sqrt(max(m.a22 - l21 * l21, 0.0)))
    return Mat2(0.0, 0.0, 0.0, math.sqrt(m.a22))


# -- distributions -----------------------------------------------------------


def norm_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError(f"norm_quantile requires 0 < p < 1, got {p}")
    return float(special.ndtri(p))


def norm_sf(x: float) -> float:
    return float(special.ndtr(-x))


def _check_df(df) -> None:
    if not df >= 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {df}")


def t_sf(x: float, df: float) -> float:
    """Upper tail ``P(T > x)`` of Student's t."""
    _check_df(df)
    return float(special.stdtr(df, -x))


def t_quantile(p: float, df: float) -> float:
    _check_df(df)
    if not 0.0 < p < 1.0:
        raise DomainError(f"t_quantile requires 0 < p < 1, got {p}")
    return float(special.stdtrit(df, p))


def chisq_sf(x: float, df: float) -> float:
    _check_df(df)
    if x < 0:
        raise DomainError(f"chisq_sf requires x >= 0, got {x}")
    if df == 2:
        return math.exp(-x / 2.0)
    return float(special.chdtrc(df, x))


def chisq_quantile(p: float, df: float) -> float:
    _check_df(df)
    if df == 2:
        return -2.0 * math.log1p(-p)
    return float(special.chdtri(df, 1.0 - p))


# -- optimizer ---------------------------------------------------------------


class OptimResult(NamedTuple):
    x: np.ndarray
    fun: float
    converged: bool
    nit: int
    nfev: int


def _nm_run(f, x0, step, tol, max_iter):
    # vertices are plain float lists: for k ~ 3 numpy's per-call overhead
    # dominates the arithmetic
    k = len(x0)
    x0 = [float(v) for v in x0]
    simplex = [x0] + [[v + (step[i] if j == i else 0.0) for j, v in enumerate(x0)] for i in range(k)]
    fvals = [f(v) for v in simplex]
    nfev = k + 1
    converged = False
    it = 0
    rk = range(k)
    while True:
        order = sorted(range(k + 1), key=fvals.__getitem__)
        simplex = [simplex[j] for j in order]
        fvals = [fvals[j] for j in order]
        best = simplex[0]
        diam = max(abs(v[i] - best[i]) for v in simplex[1:] for i in rk)
        if diam < tol and fvals[-1] - fvals[0] < tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        centroid = [sum(v[i] for v in simplex[:-1]) / k for i in rk]
        worst = simplex[-1]
        xr = [2.0 * centroid[i] - worst[i] for i in rk]
        fr = f(xr)
        nfev += 1
        if fr < fvals[0]:
            xe = [3.0 * centroid[i] - 2.0 * worst[i] for i in rk]
            fe = f(xe)
            nfev += 1
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = [0.5 * (centroid[i] + xr[i]) for i in rk]
        else:
            xc = [0.5 * (centroid[i] + worst[i]) for i in rk]
        fc = f(xc)
        nfev += 1
        if fc < min(fr, fvals[-1]):
            simplex[-1], fvals[-1] = xc, fc
            continue
        for j in range(1, k + 1):
            simplex[j] = [0.5 * (best[i] + simplex[j][i]) for i in rk]
            fvals[j] = f(simplex[j])
        nfev += k
    return np.array(simplex[0]), fvals[0], converged, it, nfev


def nelder_mead(
    f: Callable[[np.ndarray], float],
    x0: Sequence[float],
    tol: float = 1e-10,
    max_iter: int = 5000,
    step: float | Sequence[float] | None = None,
    restarts: int = 1,
) -> OptimResult:
    """Minimize ``f`` with the Nelder-Mead simplex method.

    Convergence requires both the simplex diameter (max-norm distance from the
    best vertex) and the spread of function values to fall below ``tol``. After
    the first run the search is restarted ``restarts`` times from the incumbent
    with a fresh simplex; ``converged`` reflects the final run.

    NaN values of ``f`` away from ``x0`` are treated as ``+inf``.
    """
    x0 = np.asarray(x0, dtype=float)
    f0 = f(x0)
    if math.isnan(f0):
        raise DomainError("objective is NaN at the starting point")
    if step is None:
        step = np.where(x0 != 0.0, 0.05 * np.abs(x0), 0.00025)
    step = [float(v) for v in np.broadcast_to(np.asarray(step, dtype=float), x0.shape)]

    def g(x):
        v = f(np.array(x))
        return math.inf if math.isnan(v) else float(v)

    x, fx, conv, nit, nfev = _nm_run(g, x0, step, tol, max_iter)
    for _ in range(restarts):
        x, fx, conv, it2, ev2 = _nm_run(g, x, step, tol, max_iter)
        nit += it2
        nfev += ev2
    return OptimResult(x, fx, conv, nit, nfev)


# -- random numbers ----------------------------------------------------------


@dataclass(frozen=True)
class RngStream:
    """Named, counter-split random stream.

    The generator for stream ``index`` depends only on ``(algorithm, seed,
    index)``, so replicate ``b`` sees the same numbers whatever order or
    process it runs in.
    """

    seed: int
    index: int = 0
    algorithm: str = "PCG64"

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.index,))
        try:
            bitgen = getattr(np.random, self.algorithm)
        except AttributeError:
            raise DomainError(f"unknown bit generator {self.algorithm!r}") from None
        return np.random.Generator(bitgen(ss))

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, index, self.algorithm)


def mvn2_sample(mu, cov: Mat2, rng, size: int | None = None) -> np.ndarray:
    """Draw from ``N2(mu, cov)``.

    ``rng`` is an :class:`RngStream` or a numpy ``Generator``. With ``size``
    the result has shape ``(size, 2)``, otherwise ``(2,)``.
    """
    if isinstance(rng, RngStream):
        rng = rng.generator()
    root = psd_root(cov)
    mu = np.asarray(mu, dtype=float)
    z = rng.standard_normal((1 if size is None else size, 2))
    draws = np.empty_like(z)
    draws[:, 0] = mu[0] + root.a11 * z[:, 0]
    draws[:, 1] = mu[1] + root.a21 * z[:, 0] + root.a22 * z[:, 1]
    return draws[0] if size is None else draws
