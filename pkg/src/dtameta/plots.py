"""Standalone SVG figures and CSV plot series.

The SVG is written by hand so output is byte-stable across runs and machines;
coordinates are rounded to 0.01 px.
"""

from __future__ import annotations

import csv
import warnings
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from dtameta.bivariate import BivariateFit
from dtameta.egger import FunnelSeries, funnel_series, uni_reml_fit
from dtameta.ingest import CorrectedCounts, stack
from dtameta.numerics import invlogit
from dtameta.sroc import Region, SROCCurve, confidence_region, prediction_region

WIDTH, HEIGHT = 480, 480
MARGIN = dict(left=60, right=20, top=40, bottom=50)


class _Frame:
    def __init__(self, xlim, ylim, invert_y=False):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.invert_y = invert_y
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        frac = (y - self.y0) / (self.y1 - self.y0)
        if self.invert_y:
            return MARGIN["top"] + frac * self.ph
        return MARGIN["top"] + (1.0 - frac) * self.ph


def _f(v: float) -> str:
    return f"{v:.2f}"


def _polyline(fr: _Frame, xs, ys, style: str, closed: bool = False) -> str:
    pts = " ".join(f"{_f(fr.px(x))},{_f(fr.py(y))}" for x, y in zip(xs, ys))
    tag = "polygon" if closed else "polyline"
    return f'<{tag} points="{pts}" fill="none" {style}/>'


def _axes(fr: _Frame, title: str, xlabel: str, ylabel: str, xticks, yticks) -> list[str]:
    left, top = MARGIN["left"], MARGIN["top"]
    out = [
        f'<rect x="{left}" y="{top}" width="{fr.pw}" height="{fr.ph}" fill="none" stroke="black"/>',
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<text x="{left + fr.pw / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="13">{escape(xlabel)}</text>',
        f'<text x="16" y="{top + fr.ph / 2:.0f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {top + fr.ph / 2:.0f})">{escape(ylabel)}</text>',
    ]
    for t in xticks:
        x = _f(fr.px(t))
        y = top + fr.ph
        out.append(f'<line x1="{x}" y1="{y}" x2="{x}" y2="{y + 5}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{y + 18}" text-anchor="middle" font-size="11">{t:g}</text>')
    for t in yticks:
        y = _f(fr.py(t))
        out.append(f'<line x1="{left - 5}" y1="{y}" x2="{left}" y2="{y}" stroke="black"/>')
        out.append(
            f'<text x="{left - 8}" y="{y}" text-anchor="end" dominant-baseline="middle" '
            f'font-size="11">{t:g}</text>'
        )
    return out


def _svg(body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">'
    )
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>', *body, "</svg>"]) + "\n"


def sroc_svg(
    corrected: list[CorrectedCounts],
    fit: BivariateFit,
    curve: SROCCurve | None,
    conf: Region | None,
    pred: Region | None,
    title: str = "SROC plot",
) -> str:
    fr = _Frame((0.0, 1.0), (0.0, 1.0))
    ticks = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    body = _axes(fr, title, "False positive rate", "Sensitivity", ticks, ticks)
    if curve is not None:
        body.append(_polyline(fr, curve.fpr, curve.sens, 'stroke="black" stroke-width="1.5"'))
    if conf is not None:
        body.append(
            _polyline(fr, conf.fpr, conf.sens, 'stroke="black" stroke-dasharray="6,4" class="confidence"', True)
        )
    if pred is not None:
        body.append(
            _polyline(fr, pred.fpr, pred.sens, 'stroke="black" stroke-dasharray="2,3" class="prediction"', True)
        )
    for c in corrected:
        body.append(
            f'<circle class="study" cx="{_f(fr.px(c.fpr))}" cy="{_f(fr.py(c.sens))}" r="3" fill="blue"/>'
        )
    sx, sy = invlogit(fit.mu[1]), invlogit(fit.mu[0])
    body.append(
        f'<circle class="summary" cx="{_f(fr.px(sx))}" cy="{_f(fr.py(sy))}" r="5" fill="black"/>'
    )
    if conf is not None or pred is not None:
        lx, ly = MARGIN["left"] + 190, HEIGHT - MARGIN["bottom"] - 40
        body += [
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 30}" y2="{ly}" stroke="black" stroke-dasharray="6,4"/>',
            f'<text x="{lx + 36}" y="{ly + 4}" font-size="11">95% confidence region</text>',
            f'<line x1="{lx}" y1="{ly + 16}" x2="{lx + 30}" y2="{ly + 16}" stroke="black" '
            'stroke-dasharray="2,3"/>',
            f'<text x="{lx + 36}" y="{ly + 20}" font-size="11">95% prediction region</text>',
        ]
    return _svg(body)


def _nice_ticks(lo, hi, n=5):
    span = hi - lo
    raw = span / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [round(float(t), 10) for t in np.arange(start, hi + 1e-9, step)]


def funnel_svg(series: FunnelSeries, title: str, xlabel: str) -> str:
    se_max = float(max(series.se.max(), series.contour_se.max())) * 1.05
    xs = np.concatenate([series.y, series.contour_lo, series.contour_hi])
    pad = 0.05 * float(xs.max() - xs.min() or 1.0)
    fr = _Frame((float(xs.min()) - pad, float(xs.max()) + pad), (0.0, se_max), invert_y=True)
    body = _axes(
        fr,
        title,
        xlabel,
        "Standard error",
        _nice_ticks(fr.x0, fr.x1),
        _nice_ticks(0.0, se_max),
    )
    body.append(
        f'<line class="center" x1="{_f(fr.px(series.center))}" y1="{_f(fr.py(0.0))}" '
        f'x2="{_f(fr.px(series.center))}" y2="{_f(fr.py(se_max))}" stroke="black"/>'
    )
    body.append(_polyline(fr, series.contour_lo, series.contour_se, 'stroke="gray" stroke-dasharray="4,3"'))
    body.append(_polyline(fr, series.contour_hi, series.contour_se, 'stroke="gray" stroke-dasharray="4,3"'))
    for y, se in zip(series.y, series.se):
        body.append(f'<circle class="study" cx="{_f(fr.px(y))}" cy="{_f(fr.py(se))}" r="3" fill="black"/>')
    return _svg(body)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def emit_plots(pipe, prefix, level: float = 0.95) -> list[Path]:
    """Write the SROC and two funnel plots (SVG) plus their CSV series.

    ``pipe`` is a :class:`dtameta.report.Pipeline`. Returns the written paths.
    """
    prefix = Path(prefix)
    if prefix.parent and not prefix.parent.exists():
        prefix.parent.mkdir(parents=True, exist_ok=True)
    data = pipe.data
    fit = pipe.fit
    curve = pipe.curve
    if fit.boundary:
        warnings.warn("between-study variance on the boundary; confidence/prediction regions omitted")
        conf = pred = None
    else:
        conf = confidence_region(fit, level)
        pred = prediction_region(fit, level)
    paths = []

    def out(suffix):
        p = prefix.with_name(prefix.name + suffix)
        paths.append(p)
        return p

    out_svg = out("_sroc.svg")
    out_svg.write_text(sroc_svg(data.corrected, fit, curve, conf, pred), encoding="utf-8")
    _write_csv(
        out("_sroc_points.csv"),
        ["study", "fpr", "sens"],
        [(c.id, c.fpr, c.sens) for c in data.corrected],
    )
    if curve is not None:
        _write_csv(out("_sroc_curve.csv"), ["fpr", "sens"], zip(curve.fpr, curve.sens))
    if conf is not None:
        rows = [("confidence", f, s) for f, s in zip(conf.fpr, conf.sens)]
        rows += [("prediction", f, s) for f, s in zip(pred.fpr, pred.sens)]
        _write_csv(out("_sroc_regions.csv"), ["region", "fpr", "sens"], rows)

    y, S = stack(data.studies)
    for j, (key, label) in enumerate((("sens", "logit(Se)"), ("fpr", "logit(FPR)"))):
        v = S[:, j, j]
        series = funnel_series(y[:, j], v, uni_reml_fit(y[:, j], v), level)
        out(f"_funnel_{key}.svg").write_text(
            funnel_svg(series, f"Funnel plot for {label}", label), encoding="utf-8"
        )
        _write_csv(
            out(f"_funnel_{key}.csv"),
            ["study", "y", "se"],
            [(s.id, yy, se) for s, yy, se in zip(data.studies, series.y, series.se)],
        )
        _write_csv(
            out(f"_funnel_{key}_contour.csv"),
            ["se", "lower", "upper", "center"],
            [(a, b, c, series.center) for a, b, c in zip(series.contour_se, series.contour_lo, series.contour_hi)],
        )
    return paths
