"""Command line entry point: ``rydsim run | scan | list-scenarios``."""

from __future__ import annotations

import argparse
import logging
import sys

from .dynamics import IntegrationError
from .metrics import GateError
from .perturbation import RegimeError
from .runner import ConfigError, ScanError, list_scenarios, load_config, run_scan, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rydsim", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write timeseries.csv + summary.json")
    run.add_argument("--config", required=True, help="key = value config file")
    run.add_argument("--out", help="output directory (overrides output_dir)")

    scan = sub.add_parser("scan", help="scan delta x gamma and write scan.csv")
    scan.add_argument("--config", required=True, help="key = value config file")
    scan.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    scan.add_argument("--out", help="output directory (overrides output_dir)")

    sub.add_parser("list-scenarios", help="print the named scenarios")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list-scenarios":
        for name, info in list_scenarios():
            print(f"{name:10s} {info}")
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            for summary in run_scenario(cfg, args.out):
                print(f"{summary['scenario']} delta={summary['params']['delta_over_omega']:g}: "
                      f"peak {summary['peak_value']:.6f} at t={summary['peak_time']:.4f}")
        else:
            if args.workers < 1:
                raise ConfigError(f"--workers: {args.workers} < 1")
            result = run_scan(cfg, workers=args.workers, output_dir=args.out)
            print(f"scanned {result.values.size} points, "
                  f"fidelity range [{result.values.min():.6f}, {result.values.max():.6f}]")
    except (ConfigError, OSError) as exc:
        print(f"rydsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, RegimeError, GateError, ScanError) as exc:
        print(f"rydsim: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK
