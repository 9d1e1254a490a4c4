"""Command-line front end: ``plan``, ``tables`` and ``simulate``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .config import ExperimentConfig
from .exceptions import BatchingNotBeneficial, SimulationError, StrategyError
from .metrics import is_defined, single_batch_ppv_npv, single_batch_sensitivity
from .metrics import single_batch_specificity
from .optimize import ObjectiveSpec, expected_tests, optimal_batch_size
from .plan import build_plan, format_plan
from .prob import ErrorModel
from .simulate import MEASURES, SimulationReport, run_experiment

CSV_COLUMNS = (
    "strategy", "rate",
    "acc_mean", "acc_std", "sens_mean", "sens_std", "spec_mean", "spec_std",
    "ppv_mean", "ppv_std", "npv_mean", "npv_std", "tests_mean", "tests_std",
    "batch_tests", "individual_tests",
)
_CSV_SOURCES = {
    "acc": "accuracy", "sens": "sensitivity", "spec": "specificity",
    "ppv": "ppv", "npv": "npv", "tests": "total_tests",
}
TABLE_COLUMNS = (
    "alpha", "beta", "p", "sizing", "batch_size", "tests_per_person",
    "sensitivity", "specificity", "ppv", "npv",
)
DEFAULT_TABLE_P = (0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007, 0.008, 0.009,
                   0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.10)
COUNT_MEASURES = ("total_tests", "batch_tests", "individual_tests")


class CLIError(Exception):
    pass


def fmt_measure(x) -> str:
    return "NA" if not is_defined(x) else f"{x:.4f}"


def fmt_count(x) -> str:
    return "NA" if not is_defined(x) else f"{x:.0f}"


def fmt_rate(r: float) -> str:
    return f"{r:g}"


def _fmt(measure: str, x) -> str:
    return fmt_count(x) if measure in COUNT_MEASURES else fmt_measure(x)


def _err(alpha: float, beta: float) -> ErrorModel:
    try:
        return ErrorModel(alpha, beta)
    except ValueError as e:
        raise CLIError(str(e)) from e


# plan ----------------------------------------------------------------------

def cmd_plan(args) -> str:
    if args.p is None or len(args.p) != 1:
        raise CLIError("plan needs exactly one --p")
    p = args.p[0]
    if not 0.0 <= p <= 1.0:
        raise CLIError(f"--p {p} outside [0, 1]")
    N = args.n[0] if args.n else 100_000
    err = _err(args.alpha[0], args.beta[0])
    try:
        plan = build_plan(p, N, err, p_cut=args.p_cut)
    except ValueError as e:
        raise CLIError(str(e)) from e
    doc = format_plan(plan)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"plan_p{fmt_rate(p)}.txt").write_text(doc, encoding="utf-8")
    return doc


# tables --------------------------------------------------------------------

def _table_row(err: ErrorModel, p: float, sizing: str, n) -> List[str]:
    if n is None:
        return [f"{err.alpha:g}", f"{err.beta:g}", f"{p:g}", sizing] + ["NA"] * 6
    tpp = expected_tests(n, ObjectiveSpec(p, err))
    ppv, npv = single_batch_ppv_npv(n, p, err)
    return [
        f"{err.alpha:g}", f"{err.beta:g}", f"{p:g}", sizing, str(n), fmt_measure(tpp),
        fmt_measure(single_batch_sensitivity(err)), fmt_measure(single_batch_specificity(n, p, err)),
        fmt_measure(ppv), fmt_measure(npv),
    ]


def tables_rows(alphas: Sequence[float], betas: Sequence[float], ps: Sequence[float],
                sizes: Sequence[int]):
    for a in alphas:
        for b in betas:
            if a + b >= 1.0:
                continue
            err = _err(a, b)
            for p in ps:
                if not 0.0 < p < 1.0:
                    raise CLIError(f"--p {p} must be strictly between 0 and 1")
                try:
                    n_opt = optimal_batch_size(ObjectiveSpec(p, err)).n_star
                except BatchingNotBeneficial:
                    n_opt = None
                yield _table_row(err, p, "optimal", n_opt)
                for n in sizes:
                    if n < 1:
                        raise CLIError(f"--n {n} must be positive")
                    yield _table_row(err, p, "fixed", n)


def cmd_tables(args) -> str:
    alphas = args.alpha if args.alpha is not None else [0.0, 0.01, 0.03]
    betas = args.beta if args.beta is not None else [0.0, 0.10, 0.15, 0.20, 0.25]
    ps = args.p if args.p is not None else list(DEFAULT_TABLE_P)
    sizes = [int(n) for n in args.n] if args.n is not None else [10]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for row in tables_rows(alphas, betas, ps, sizes):
        w.writerow(row)
    text = buf.getvalue()
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "tables.csv").write_text(text, encoding="utf-8")
    return text


# simulate ------------------------------------------------------------------

def config_from_args(args) -> ExperimentConfig:
    try:
        base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    except (OSError, ValueError, StrategyError, TypeError) as e:
        raise CLIError(f"cannot load config {args.config}: {e}") from e
    base = base.to_dict()
    if args.p is not None:
        base["rates"] = list(args.p)
    if args.n is not None:
        if len(args.n) != 1:
            raise CLIError("simulate takes one --n (population size)")
        base["population_size"] = int(args.n[0])
    if args.alpha is not None:
        base["alpha"] = args.alpha[0]
    if args.beta is not None:
        base["beta"] = args.beta[0]
    if args.p_cut_given:
        base["p_cut"] = args.p_cut
    for flag, key in (("seed", "seed"), ("reps", "repetitions"), ("out_dir", "out_dir"),
                      ("workers", "workers")):
        if getattr(args, flag) is not None:
            base[key] = getattr(args, flag)
    if args.strategies is not None:
        base["strategies"] = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if args.pilot:
        base["pilot"] = True
    try:
        return ExperimentConfig.from_dict(base)
    except (ValueError, StrategyError, TypeError) as e:
        raise CLIError(f"invalid config: {e}") from e


def report_csv(report: SimulationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in report.cells:
        row = [c.strategy, fmt_rate(c.rate)]
        for short, m in _CSV_SOURCES.items():
            row += [_fmt(m, c.mean[m]), _fmt(m, c.std[m])]
        row += [fmt_count(c.mean["batch_tests"]), fmt_count(c.mean["individual_tests"])]
        w.writerow(row)
    return buf.getvalue()


def report_text(report: SimulationReport) -> str:
    cfg = report.config
    rates = list(cfg.rates)
    lines = [
        "# pooled testing simulation report",
        f"master_seed: {cfg.seed}",
        f"repetitions: {cfg.repetitions}",
        f"population_size: {cfg.population_size}",
        f"alpha: {cfg.alpha:g}  beta: {cfg.beta:g}  "
        f"(individual-test sensitivity {1 - cfg.beta:g}, specificity {1 - cfg.alpha:g})",
        "",
        "## config",
        cfg.to_json().rstrip("\n"),
        "",
        "## results (mean with standard deviation in parentheses)",
    ]
    width = 18
    head = "strategy  measure           " + "".join(f"{fmt_rate(r):>{width}}" for r in rates)
    for strat in cfg.strategy_objects():
        lines += ["", head]
        for m in MEASURES:
            cells = []
            for r in rates:
                c = report.cell(strat.label, r)
                cells.append(f"{_fmt(m, c.mean[m])} ({_fmt(m, c.std[m])})")
            lines.append(f"{strat.label:<10}{m:<18}" + "".join(f"{s:>{width}}" for s in cells))
        split = [f"{fmt_count(report.cell(strat.label, r).mean['batch_tests'])}+"
                 f"{fmt_count(report.cell(strat.label, r).mean['individual_tests'])}" for r in rates]
        lines.append(f"{strat.label:<10}{'B+Ind':<18}" + "".join(f"{s:>{width}}" for s in split))
    lines += ["", "## strategies"]
    for strat in cfg.strategy_objects():
        lines.append(f"{strat.label}: {json.dumps(strat.to_dict(), sort_keys=True)}")
    return "\n".join(lines) + "\n"


def plot_data(report: SimulationReport):
    """One CSV per measure: rate column, then a mean column per strategy."""
    cfg = report.config
    labels = [s.label for s in cfg.strategy_objects()]
    out = {}
    for m in MEASURES:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rate"] + labels)
        for r in cfg.rates:
            w.writerow([fmt_rate(r)] + [_fmt(m, report.cell(s, r).mean[m]) for s in labels])
        out[m] = buf.getvalue()
    return out


def write_report(report: SimulationReport, out_dir) -> List[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    put("summary.csv", report_csv(report))
    put("report.txt", report_text(report))
    put("config.json", report.config.to_json())
    if report.config.plot_data:
        for m, text in plot_data(report).items():
            put(f"plot_{m}.csv", text)
    return written


def cmd_simulate(args) -> str:
    cfg = config_from_args(args)

    def progress(done, total):
        if args.verbose:
            print(f"\r{done}/{total} repetitions", end="", file=sys.stderr, flush=True)

    try:
        report = run_experiment(cfg, progress=progress)
    except SimulationError as e:
        raise CLIError(str(e)) from e
    if args.verbose:
        print(file=sys.stderr)
    paths = write_report(report, cfg.out_dir)
    return "".join(f"wrote {p}\n" for p in paths)


# entry point ---------------------------------------------------------------

class _PCut(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        namespace.p_cut_given = True


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multipool", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, p_help, n_help):
        sp.add_argument("--p", type=float, nargs="+", help=p_help)
        sp.add_argument("--n", type=float, nargs="+", help=n_help)
        sp.add_argument("--alpha", type=float, nargs="+", help="false positive rate(s) of one assay")
        sp.add_argument("--beta", type=float, nargs="+", help="false negative rate(s) of one assay")
        sp.add_argument("--p-cut", type=float, default=0.30, action=_PCut,
                        help="rate above which a subpopulation goes to individual tests")
        sp.add_argument("--out-dir", help="directory for output files")

    sp = sub.add_parser("plan", help="expected multi-round plan for one infection rate")
    common(sp, "initial infection rate", "population size (default 100000)")
    sp.set_defaults(func=cmd_plan, alpha=[0.0], beta=[0.0])

    sp = sub.add_parser("tables", help="optimal sizes, specificity and PPV/NPV over a grid")
    common(sp, "infection rates", "fixed batch sizes to tabulate besides the optimum")
    sp.set_defaults(func=cmd_tables)

    sp = sub.add_parser("simulate", help="Monte Carlo comparison of testing strategies")
    common(sp, "infection rates (overrides config)", "population size (overrides config)")
    sp.add_argument("--config", help="JSON experiment config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--strategies", help="comma-separated strategy kinds, e.g. A,B,F")
    sp.add_argument("--pilot", action="store_true", help="estimate the round-1 rate from a pilot")
    sp.add_argument("--workers", type=int, help="worker processes for repetitions")
    sp.add_argument("-v", "--verbose", action="store_true")
    sp.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "p_cut_given"):
        args.p_cut_given = False
    try:
        text = args.func(args)
    except CLIError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
