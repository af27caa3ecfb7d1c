"""Reading 2x2 study tables and turning them into logit-scale outcomes.

The canonical CSV column order is ``study,TP,FN,FP,TN``. Note that R's
``sum.dta(TP, FN, TN, FP)`` takes TN before FP; transposing the two silently
swaps specificity and false positive rate.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from dtameta.exceptions import DomainError, InputError
from dtameta.numerics import Mat2

COLUMNS = ("study", "TP", "FN", "FP", "TN")
POLICIES = ("all", "only-zero", "if-any-zero", "none")


@dataclass(frozen=True)
class StudyTable:
    id: str
    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fn", "fp", "tn"):
            if getattr(self, name) < 0:
                raise InputError(f"negative count {name}={getattr(self, name)}")
        if self.tp + self.fn < 1:
            raise InputError(f"study {self.id!r} has no diseased subjects (TP+FN=0)")
        if self.fp + self.tn < 1:
            raise InputError(f"study {self.id!r} has no non-diseased subjects (FP+TN=0)")

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return (self.tp, self.fn, self.fp, self.tn)

    @property
    def has_zero(self) -> bool:
        return 0 in self.counts


@dataclass(frozen=True)
class CorrectedCounts:
    id: str
    tp: float
    fn: float
    fp: float
    tn: float

    @property
    def fpr(self) -> float:
        return self.fp / (self.fp + self.tn)

    @property
    def sens(self) -> float:
        return self.tp / (self.tp + self.fn)


@dataclass(frozen=True)
class TransformedStudy:
    """Per-study outcome ``y = (logit Se, logit FPR)`` with covariance ``S``."""

    id: str
    y: tuple[float, float]
    S: Mat2

    @property
    def se(self) -> tuple[float, float]:
        return (math.sqrt(self.S.a11), math.sqrt(self.S.a22))


def parse_studies(text: str, column_map: Mapping[str, str] | None = None) -> list[StudyTable]:
    """Parse CSV text into study tables.

    ``column_map`` maps names found in the file onto the canonical names,
    e.g. ``{"author": "study"}``. Header matching is case-insensitive.
    Rows are numbered from 1 (the first data row) in error messages.
    """
    if text.startswith("\ufeff"):
        text = text[1:]
    rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
    if not rows:
        raise InputError("empty file")
    rename = {k.strip().lower(): v.strip().lower() for k, v in (column_map or {}).items()}
    header = [rename.get(h.strip().lower(), h.strip().lower()) for h in rows[0]]
    expected = [c.lower() for c in COLUMNS]
    if header != expected:
        missing = [c for c in expected if c not in header]
        extra = [h for h in header if h not in expected]
        detail = []
        if missing:
            detail.append(f"missing {missing}")
        if extra:
            detail.append(f"unexpected {extra}")
        if not detail:
            detail.append(f"wrong order {header}")
        raise InputError(
            f"header must be {','.join(COLUMNS)}: {'; '.join(detail)}", row=0
        )
    if len(rows) < 2:
        raise InputError("no data rows")

    studies = []
    seen = set()
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(COLUMNS):
            raise InputError(f"expected {len(COLUMNS)} fields, got {len(row)}", row=i)
        sid = row[0].strip()
        if not sid:
            raise InputError("empty study id", row=i, column="study")
        if sid in seen:
            raise InputError(f"duplicate study id {sid!r}", row=i, column="study")
        seen.add(sid)
        counts = []
        for col, raw in zip(COLUMNS[1:], row[1:]):
            try:
                val = int(raw.strip())
            except ValueError:
                raise InputError(f"not an integer: {raw!r}", row=i, column=col) from None
            if val < 0:
                raise InputError(f"negative count {val}", row=i, column=col)
            counts.append(val)
        try:
            studies.append(StudyTable(sid, *counts))
        except InputError as exc:
            raise InputError(str(exc), row=i) from None
    return studies


def load_studies(path, column_map=None) -> list[StudyTable]:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"input is not UTF-8: {exc}") from None
    return parse_studies(text, column_map)


def apply_correction(
    t: StudyTable, c: float = 0.5, policy: str = "all", any_zero: bool | None = None
) -> CorrectedCounts:
    """Add a continuity correction ``c`` to the cells of one study.

    Policies: ``all`` corrects every study; ``only-zero`` corrects only studies
    that contain a zero cell; ``if-any-zero`` corrects every study provided at
    least one study in the data set has a zero cell (pass ``any_zero``);
    ``none`` leaves counts unchanged.
    """
    if c < 0:
        raise DomainError(f"correction must be >= 0, got {c}")
    if policy not in POLICIES:
        raise DomainError(f"unknown correction policy {policy!r}; choose from {POLICIES}")
    if policy == "all":
        add = c
    elif policy == "only-zero":
        add = c if t.has_zero else 0.0
    elif policy == "if-any-zero":
        add = c if (t.has_zero if any_zero is None else any_zero) else 0.0
    else:
        add = 0.0
    return CorrectedCounts(t.id, t.tp + add, t.fn + add, t.fp + add, t.tn + add)


def transform_study(cc: CorrectedCounts) -> TransformedStudy:
    if min(cc.tp, cc.fn, cc.fp, cc.tn) <= 0:
        raise InputError(
            f"study {cc.id!r} has a zero cell after correction; "
            "use a positive correction with policy 'all' or 'only-zero'"
        )
    y1 = math.log(cc.tp) - math.log(cc.fn)
    y2 = math.log(cc.fp) - math.log(cc.tn)
    s11 = 1.0 / cc.tp + 1.0 / cc.fn
    s22 = 1.0 / cc.fp + 1.0 / cc.tn
    return TransformedStudy(cc.id, (y1, y2), Mat2.diag(s11, s22))


def prepare(
    studies: Iterable[StudyTable], c: float = 0.5, policy: str = "all"
) -> tuple[list[CorrectedCounts], list[TransformedStudy]]:
    """Correct and transform a whole data set; the ``sum.dta`` step."""
    studies = list(studies)
    any_zero = any(t.has_zero for t in studies)
    corrected = [apply_correction(t, c, policy, any_zero=any_zero) for t in studies]
    return corrected, [transform_study(cc) for cc in corrected]


def stack(studies: Iterable[TransformedStudy]) -> tuple[np.ndarray, np.ndarray]:
    """Arrays ``y`` of shape (N, 2) and ``S`` of shape (N, 2, 2)."""
    studies = list(studies)
    y = np.array([s.y for s in studies], dtype=float).reshape(-1, 2)
    S = np.array([s.S.to_array() for s in studies], dtype=float).reshape(-1, 2, 2)
    return y, S


def from_arrays(y, S, ids=None) -> list[TransformedStudy]:
    y = np.asarray(y, dtype=float)
    S = np.asarray(S, dtype=float)
    ids = ids if ids is not None else [str(i + 1) for i in range(len(y))]
    return [
        TransformedStudy(ids[i], (float(y[i, 0]), float(y[i, 1])), Mat2.from_array(S[i]))
        for i in range(len(y))
    ]
