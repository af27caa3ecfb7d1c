"""Analysis pipeline sections and the JSON report document.

Every CLI subcommand assembles its output from the section builders here, so
the full ``report`` is a superset of any single subcommand for the same
settings.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dtameta import __version__
from dtameta.bivariate import BivariateFit, fit_reitsma, summary_rows
from dtameta.egger import EggerResult, egger_test
from dtameta.exceptions import DomainError
from dtameta.ingest import CorrectedCounts, TransformedStudy, load_studies, prepare, stack
from dtameta.score_tests import PBTestResult, msset2, msset3
from dtameta.sroc import SROCCurve, sroc_curve

SCHEMA = 1


@dataclass
class Settings:
    correction: float = 0.5
    correction_policy: str = "all"
    convention: str = "without-xtx"
    B: int = 2000
    seed: int = 1
    se_covariate: str = "within"
    grid: int = 5000
    level: float = 0.95
    workers: int = 1
    column_map: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "B": self.B,
            "column_map": dict(sorted(self.column_map.items())),
            "convention": self.convention,
            "correction": self.correction,
            "correction_policy": self.correction_policy,
            "grid": self.grid,
            "level": self.level,
            "se_covariate": self.se_covariate,
            "seed": self.seed,
            "workers": self.workers,
        }


@dataclass
class Dataset:
    path: str
    digest: str
    corrected: list[CorrectedCounts]
    studies: list[TransformedStudy]

    @property
    def fpr_range(self) -> tuple[float, float]:
        fpr = [c.fpr for c in self.corrected]
        return (min(fpr), max(fpr))


def load_dataset(path, settings: Settings) -> Dataset:
    raw = Path(path).read_bytes()
    tables = load_studies(path, settings.column_map)
    corrected, studies = prepare(tables, settings.correction, settings.correction_policy)
    return Dataset(str(path), hashlib.sha256(raw).hexdigest(), corrected, studies)


def fit_section(fit: BivariateFit, level: float) -> dict:
    rows = {r.name: r for r in summary_rows(fit, level)}
    coef = {}
    for key, name in (("tsens", "tsens"), ("tfpr", "tfpr")):
        r = rows[name]
        coef[key] = {
            "estimate": r.estimate,
            "se": r.se,
            "z": r.z,
            "p": r.p,
            "ci_lb": r.ci_lb,
            "ci_ub": r.ci_ub,
        }
    back = {}
    for key, name in (("sensitivity", "sensitivity"), ("fpr", "false pos. rate")):
        r = rows[name]
        back[key] = {"estimate": r.estimate, "ci_lb": r.ci_lb, "ci_ub": r.ci_ub}
    return {
        "n": fit.n,
        "mu": list(fit.mu),
        "cov_mu": [[fit.cov_mu.a11, fit.cov_mu.a12], [fit.cov_mu.a21, fit.cov_mu.a22]],
        "sigma": [[fit.sigma.a11, fit.sigma.a12], [fit.sigma.a21, fit.sigma.a22]],
        "sd": list(fit.sd),
        "rho": fit.rho,
        "coefficients": coef,
        "back_transformed": back,
        "loglik": fit.loglik,
        "aic": fit.aic,
        "bic": fit.bic,
        "convention": fit.convention,
        "converged": fit.converged,
        "boundary": fit.boundary,
    }


def sroc_section(curve: SROCCurve | None) -> dict:
    if curve is None:
        return {"auc": None, "pauc": None, "fpr_range": None, "hsroc": None}
    p = curve.params
    return {
        "auc": curve.auc,
        "pauc": curve.pauc,
        "fpr_range": list(curve.fpr_range),
        "hsroc": {
            "Lambda": p.lam,
            "Beta": p.beta,
            "Theta": p.theta,
            "tau_theta2": p.tau_theta2,
            "tau_alpha2": p.tau_alpha2,
        },
    }


def egger_section(res: EggerResult) -> dict:
    return {
        "t": res.t,
        "df": res.df,
        "p": res.p,
        "slope": res.slope,
        "slope_se": res.slope_se,
        "limit_b": res.limit_b,
        "limit_se": res.limit_se,
        "ci_lb": res.ci_lb,
        "ci_ub": res.ci_ub,
        "phi": res.phi,
    }


def test_section(res: PBTestResult) -> dict:
    out = {
        "method": res.method,
        "T": res.T,
        "P": res.P,
        "b0": list(res.b0),
        "se_covariate": res.covariate,
    }
    if res.method == "MSSET3":
        out.update(B=res.B, seed=res.seed, n_failed=res.n_failed, boot_stats=list(res.boot_stats))
    return out


class Pipeline:
    """Lazily computed analyses for one data set and one set of settings."""

    def __init__(self, data: Dataset, settings: Settings):
        self.data = data
        self.settings = settings
        self._fit = None
        self._curve = False

    @property
    def fit(self) -> BivariateFit:
        if self._fit is None:
            self._fit = fit_reitsma(self.data.studies, self.settings.convention)
        return self._fit

    @property
    def curve(self) -> SROCCurve | None:
        if self._curve is False:
            if self.fit.boundary:
                warnings.warn("between-study variance on the boundary; SROC curve not defined")
                self._curve = None
            else:
                self._curve = sroc_curve(self.fit, self.data.fpr_range, self.settings.grid)
        return self._curve

    def egger(self) -> dict[str, EggerResult]:
        y, S = stack(self.data.studies)
        return {
            "sensitivity": egger_test(y[:, 0], S[:, 0, 0]),
            "fpr": egger_test(y[:, 1], S[:, 1, 1]),
        }

    def msset2(self) -> PBTestResult:
        return msset2(
            self.data.studies, self.settings.se_covariate, self.settings.convention, fit=self.fit
        )

    def msset3(self) -> PBTestResult:
        s = self.settings
        return msset3(self.data.studies, s.B, s.seed, s.se_covariate, s.convention, s.workers)


def build_document(pipe: Pipeline, sections) -> dict:
    """Assemble a report with the requested ``sections``.

    Valid names: ``fit``, ``sroc``, ``egger``, ``msset2``, ``msset3``.
    Warnings raised while computing are collected into the document.
    """
    unknown = set(sections) - {"fit", "sroc", "egger", "msset2", "msset3"}
    if unknown:
        raise DomainError(f"unknown report sections {sorted(unknown)}")
    doc = {
        "schema": SCHEMA,
        "tool_version": __version__,
        "input": Path(pipe.data.path).name,
        "input_digest": pipe.data.digest,
        "n_studies": len(pipe.data.studies),
        "settings": pipe.settings.as_dict(),
    }
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if "fit" in sections:
            doc["fit"] = fit_section(pipe.fit, pipe.settings.level)
        if "sroc" in sections:
            doc["sroc"] = sroc_section(pipe.curve)
        if "egger" in sections:
            doc["egger"] = {k: egger_section(v) for k, v in pipe.egger().items()}
        if "msset2" in sections:
            doc["msset2"] = test_section(pipe.msset2())
        if "msset3" in sections:
            doc["msset3"] = test_section(pipe.msset3())
    doc["warnings"] = sorted({str(w.message) for w in caught})
    return doc


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(doc: dict) -> str:
    # repr-based floats round-trip exactly, so the file is lossless
    return json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_report(doc: dict, path) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")
