"""Command-line entry point.

    selbias simulate CONFIG.json [--output report.csv] [--threads N]
    selbias lemma CONFIG.json    [--output report.csv] [--threads N]
    selbias realdata CONFIG.json DATA.csv [--output report.csv] [--threads N]
    selbias version

The report goes to ``--output`` as CSV (stdout when omitted, after the
table). Exit codes: 0 success, 1 invalid config or input file, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, CsvFormatError
from .evaluation import rows_to_csv, rows_to_table
from .harness.config import ScenarioConfig, ScenarioKind
from .harness.lemmas import run_lemma_checks
from .harness.scenarios import run_one_sample_scenario, run_real_data, run_two_sample_scenario

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("selbias")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="selbias", description="Selection-bias correction studies.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", type=Path, help="scenario JSON file")
        p.add_argument("--output", "-o", type=Path, help="write the CSV report here")
        p.add_argument("--threads", type=int, help="worker threads (default: $SELBIAS_THREADS or 1)")

    common(sub.add_parser("simulate", help="one- or two-sample simulation study"))
    common(sub.add_parser("lemma", help="Monte Carlo checks of the bias identities"))
    rd = sub.add_parser("realdata", help="train/test evaluation on a CSV data matrix")
    common(rd)
    rd.add_argument("data", type=Path, help="CSV with a header row and optional 'group' column")
    sub.add_parser("version", help="print the package version")
    return ap


def _run(args) -> list:
    cfg = ScenarioConfig.from_json(args.config)
    if args.command == "simulate":
        if cfg.scenario in (ScenarioKind.ONE_SAMPLE_GAUSSIAN, ScenarioKind.ONE_SAMPLE_MVT):
            return run_one_sample_scenario(cfg, args.threads)
        if cfg.scenario is ScenarioKind.TWO_SAMPLE:
            return run_two_sample_scenario(cfg, args.threads)
        raise ConfigError(f"'simulate' cannot run a {cfg.scenario.value} config")
    if args.command == "lemma":
        return run_lemma_checks(cfg, args.threads)
    if not args.data.is_file():
        raise CsvFormatError(f"data file not found: {args.data}")
    return run_real_data(cfg, args.data, args.threads)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    try:
        rows = _run(args)
    except (ConfigError, CsvFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime error
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    sys.stdout.write(rows_to_table(rows))
    report = rows_to_csv(rows)
    if args.output is not None:
        args.output.write_text(report)
    else:
        sys.stdout.write("\n" + report)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
