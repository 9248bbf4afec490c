"""Command-line entry point: ``languidpso run|report|hist|suite``.

Exit codes: 0 success, 1 user error (bad flags, unreadable or malformed
input, unwritable output), 2 internal error (including failed runs).
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from typing import Sequence

from . import harness, stats
from .benchfuncs import build_suite, suite_manifest
from .harness import ExperimentPlan, RecordFormatError

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _default_workers() -> int:
    raw = os.environ.get("PSO_WORKERS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise UserError(f"PSO_WORKERS must be an integer, got {raw!r}") from None
    if value < 1:
        raise UserError("PSO_WORKERS must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="languidpso", description="Languid particle dynamics experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="execute an experiment plan and write JSON-lines records")
    run.add_argument("--plan", required=True, help="plan file (JSON)")
    run.add_argument("--out", required=True, help="records file to write")
    run.add_argument("--workers", type=int, default=None, help="worker processes (default: $PSO_WORKERS or 1)")
    run.add_argument("--seed", type=int, default=None, help="override the plan's master seed")
    run.add_argument("--preset", choices=["table1"], default=None, help="use the Table 1 parameters per function")
    run.add_argument("--runs", type=int, default=None, help="override runs per config")
    run.add_argument("--no-timing", action="store_true", help="omit wall times so reruns are byte-identical")

    rep = sub.add_parser("report", help="best-vs-best comparison and summary counts")
    rep.add_argument("--records", nargs="+", required=True, help="records files")
    rep.add_argument("--level", type=float, default=0.05, help="significance level (default 0.05)")
    rep.add_argument("--format", choices=["csv", "text"], default="text")
    rep.add_argument("--out", default=None, help="output file (default: stdout)")

    hist = sub.add_parser("hist", help="histogram of per-config alpha values")
    hist.add_argument("--records", nargs="+", required=True, help="records files")
    hist.add_argument("--bins", type=int, default=20, help="number of bins over [-2, 2] (default 20)")
    hist.add_argument("--out", default=None, help="CSV output file (default: stdout)")

    suite = sub.add_parser("suite", help="write the benchmark suite manifest (JSON)")
    suite.add_argument("--dim", type=int, required=True, help="dimension D >= 2")
    suite.add_argument("--seed", type=int, default=0, help="suite seed")
    suite.add_argument("--out", default=None, help="output file (default: stdout)")
    return parser


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise UserError(f"cannot write {path}: {exc.strerror}") from None


def _load_all(paths: Sequence[str]) -> list[harness.RunRecord]:
    records = []
    for path in paths:
        try:
            records.extend(harness.load_records(path))
        except OSError as exc:
            raise UserError(f"cannot read {path}: {exc.strerror}") from None
        except RecordFormatError as exc:
            raise UserError(str(exc)) from None
    return records


def cmd_run(args) -> int:
    try:
        plan = harness.load_plan(args.plan)
    except OSError as exc:
        raise UserError(f"cannot read plan {args.plan}: {exc.strerror}") from None
    except (ValueError, TypeError) as exc:
        raise UserError(f"invalid plan {args.plan}: {exc}") from None
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.preset is not None:
        overrides["preset"] = args.preset
    if args.runs is not None:
        overrides["runs_per_config"] = args.runs
    try:
        plan = ExperimentPlan.from_dict({**plan.to_dict(), **overrides})
    except ValueError as exc:
        raise UserError(str(exc)) from None
    workers = args.workers if args.workers is not None else _default_workers()
    if workers < 1:
        raise UserError("--workers must be >= 1")
    try:
        open(args.out, "w").close()
    except OSError as exc:
        raise UserError(f"cannot write {args.out}: {exc.strerror}") from None
    try:
        records = harness.execute_plan(plan, workers)
    except ValueError as exc:
        raise UserError(str(exc)) from None
    harness.persist_records(args.out, records, timing=not args.no_timing)
    failed = [r for r in records if not r.valid]
    print(f"{len(records)} records written to {args.out}", file=sys.stderr)
    if failed:
        print(f"{len(failed)} runs failed:", file=sys.stderr)
        for r in failed[:20]:
            print(f"  {r.function} config {r.config_index} run {r.run}: {r.message}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def comparison_rows(records, level: float = 0.05) -> list[stats.ComparisonRow]:
    """One best-vs-best row per function; both arms must be present."""
    variants = {r.variant for r in records}
    if len(variants) > 1:
        raise UserError(f"records mix variants {sorted(variants)}; report one variant at a time")
    best = harness.select_best(records)
    rows = []
    for fid in harness.function_order(records):
        missing = [name for arm, name in ((False, "pure (languid=false)"), (True, "languid (languid=true)"))
                   if (fid, arm) not in best]
        if missing:
            raise UserError(f"{fid}: missing {' and '.join(missing)} arm")
        bx, bl = best[(fid, False)], best[(fid, True)]
        rows.append(stats.compare_pair(bx.summary, bl.summary, level, fid, bx.config.key, bl.config.key))
    if not rows:
        raise UserError("no valid records")
    return rows


def cmd_report(args) -> int:
    rows = comparison_rows(_load_all(args.records), args.level)
    summary = stats.format_summary_text(rows)
    if args.format == "csv":
        _emit(stats.format_rows_csv(rows), args.out)
        sys.stderr.write(summary)
    else:
        _emit(stats.format_rows_text(rows) + "\n" + summary, args.out)
    return EXIT_OK


def config_alphas(records) -> list[float]:
    """Alpha of every (function, config) evaluated in both arms."""
    groups = harness.group_errors(records)
    means = {}
    for (fid, arm), configs in groups.items():
        for (config, _), errors in configs.items():
            means[(fid, config.key, arm)] = stats.SampleSummary.from_errors(errors).mean
    alphas = []
    for (fid, key, arm), eps in means.items():
        if not arm and (fid, key, True) in means:
            alphas.append(stats.alpha_rating(eps, means[(fid, key, True)]))
    return alphas


def cmd_hist(args) -> int:
    if args.bins < 1:
        raise UserError("--bins must be >= 1")
    alphas = config_alphas(_load_all(args.records))
    if not alphas:
        raise UserError("no (function, config) pairs present in both arms")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_lo", "bin_hi", "count"])
    for (lo, hi), count in stats.histogram_alpha(alphas, args.bins):
        writer.writerow([repr(lo), repr(hi), count])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_suite(args) -> int:
    if args.dim < 2:
        raise UserError(f"--dim must be >= 2, got {args.dim}")
    import json

    manifest = suite_manifest(build_suite(args.dim, args.seed))
    _emit(json.dumps(manifest, indent=2) + "\n", args.out)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "report": cmd_report, "hist": cmd_hist, "suite": cmd_suite}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UserError as exc:
        print(f"languidpso {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"languidpso {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
