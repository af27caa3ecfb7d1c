"""Command-line interface.

Exit codes: 0 success, 2 input/usage error, 3 fit or test failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings

from dtameta import __version__
from dtameta.bivariate import CONVENTIONS, summarize
from dtameta.exceptions import DomainError, FitError, InputError, TestError
from dtameta.ingest import POLICIES
from dtameta.plots import emit_plots
from dtameta.report import Pipeline, Settings, build_document, dumps, load_dataset
from dtameta.score_tests import COVARIATES

EXIT_OK, EXIT_INPUT, EXIT_FIT, EXIT_IO = 0, 2, 3, 4

SECTIONS = {
    "fit": ["fit"],
    "sroc": ["fit", "sroc"],
    "egger": ["egger"],
    "test": ["msset2", "msset3"],
    "report": ["fit", "sroc", "egger", "msset2", "msset3"],
}


def _column_map(text: str) -> dict:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        src, sep, dst = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected NAME=CANONICAL, got {item!r}")
        out[src.strip()] = dst.strip()
    return out


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help="CSV with header study,TP,FN,FP,TN")
    common.add_argument("--correction", type=float, default=0.5, help="continuity correction (default 0.5)")
    common.add_argument(
        "--correction-policy", choices=POLICIES, default="all", help="which studies get the correction"
    )
    common.add_argument(
        "--column-map",
        type=_column_map,
        default={},
        metavar="NAME=CANON,...",
        help="rename input headers, e.g. author=study,tp=TP",
    )
    common.add_argument("--convention", choices=CONVENTIONS, default="without-xtx", help="REML loglik constant")
    common.add_argument("--level", type=float, default=0.95, help="confidence level (default 0.95)")
    common.add_argument("-o", "--out", help="write JSON here instead of stdout")

    boot = argparse.ArgumentParser(add_help=False)
    boot.add_argument("--B", type=int, default=2000, help="bootstrap replicates (default 2000, min 100)")
    boot.add_argument("--seed", type=_seed, default=1, help="master seed (default 1)")
    boot.add_argument("--se-covariate", choices=COVARIATES, default="within")
    boot.add_argument("--workers", type=int, default=1, help="processes for the bootstrap")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid", type=int, default=5000, help="AUC integration points (default 5000)")

    text = argparse.ArgumentParser(add_help=False)
    text.add_argument("--text", action="store_true", help="print a human-readable summary instead of JSON")

    parser = argparse.ArgumentParser(
        prog="dtameta", description="DTA meta-analysis with generalized Egger publication-bias tests."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fit", parents=[common, text], help="bivariate REML fit")
    sub.add_parser("sroc", parents=[common, grid], help="SROC curve, AUC and partial AUC")
    sub.add_parser("egger", parents=[common, text], help="univariate Egger tests")
    sub.add_parser("test", parents=[common, boot, text], help="MSSET2 and MSSET3 tests")
    rp = sub.add_parser("report", parents=[common, boot, grid], help="full pipeline to JSON")
    rp.add_argument("--plots-prefix", help="also write SVG/CSV plots with this path prefix")
    pp = sub.add_parser("plot", parents=[common, grid], help="SVG figures and CSV series")
    pp.add_argument("--plots-prefix", required=True, help="output path prefix")
    return parser


def _settings(args) -> Settings:
    s = Settings(
        correction=args.correction,
        correction_policy=args.correction_policy,
        convention=args.convention,
        level=args.level,
        column_map=args.column_map,
    )
    for name in ("B", "seed", "se_covariate", "workers", "grid"):
        if hasattr(args, name):
            setattr(s, name, getattr(args, name))
    if not 0.0 < s.level < 1.0:
        raise DomainError(f"--level must lie in (0, 1), got {s.level}")
    if s.B < 100:
        raise DomainError(f"--B must be at least 100, got {s.B}")
    if s.grid < 10:
        raise DomainError(f"--grid must be at least 10, got {s.grid}")
    if s.workers < 1:
        raise DomainError(f"--workers must be >= 1, got {s.workers}")
    return s


def _text(pipe: Pipeline, command: str) -> str:
    if command == "fit":
        return summarize(pipe.fit, pipe.settings.level)
    lines = []
    if command == "egger":
        for key, res in pipe.egger().items():
            lines += [
                f"Regression test for funnel plot asymmetry: {key}",
                "  model: weighted regression with multiplicative dispersion; predictor: standard error",
                f"  t = {res.t:.4f}, df = {res.df}, p = {res.p:.4f}",
                f"  limit estimate (se -> 0): b = {res.limit_b:.4f} (CI: {res.ci_lb:.4f}, {res.ci_ub:.4f})",
            ]
        return "\n".join(lines)
    t2 = pipe.msset2()
    t3 = pipe.msset3()
    return "\n".join(
        [
            f"MSSET2: T = {t2.T:.6f}, P = {t2.P:.6g}, b0 = ({t2.b0[0]:.7f}, {t2.b0[1]:.7f})",
            f"MSSET3: T = {t3.T:.6f}, P = {t3.P:.6g} (B = {t3.B}, seed = {t3.seed}, failed = {t3.n_failed})",
        ]
    )


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        settings = _settings(args)
        data = load_dataset(args.input, settings)
        pipe = Pipeline(data, settings)
        if args.command == "plot":
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                paths = emit_plots(pipe, args.plots_prefix, settings.level)
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
            for p in paths:
                print(p)
            return EXIT_OK
        if getattr(args, "text", False):
            print(_text(pipe, args.command))
            return EXIT_OK
        doc = build_document(pipe, SECTIONS[args.command])
        for w in doc["warnings"]:
            print(f"warning: {w}", file=sys.stderr)
        payload = dumps(doc)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(payload)
        else:
            sys.stdout.write(payload)
        if args.command == "report" and args.plots_prefix:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                emit_plots(pipe, args.plots_prefix, settings.level)
        return EXIT_OK
    except (InputError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FitError, TestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
