"""Diagnostic test accuracy meta-analysis with generalized Egger tests."""

from dtameta.bivariate import BivariateFit, fit_reitsma
from dtameta.egger import EggerResult, egger_test, uni_reml_fit
from dtameta.exceptions import (
    DomainError,
    DTAError,
    FitError,
    InputError,
    SingularMatrixError,
    TestError,
)
from dtameta.ingest import StudyTable, TransformedStudy, load_studies, parse_studies
from dtameta.score_tests import PBTestResult, msset2, msset3
from dtameta.sroc import auc, map_hsroc, partial_auc, sroc_sens

__version__ = "0.1.0"

__all__ = [
    "BivariateFit",
    "DomainError",
    "DTAError",
    "EggerResult",
    "FitError",
    "InputError",
    "PBTestResult",
    "SingularMatrixError",
    "StudyTable",
    "TestError",
    "TransformedStudy",
    "auc",
    "egger_test",
    "fit_reitsma",
    "load_studies",
    "map_hsroc",
    "msset2",
    "msset3",
    "parse_studies",
    "partial_auc",
    "sroc_sens",
    "uni_reml_fit",
]
