"""Command-line interface.

Subcommands: run | compare | ablate | plot. Exit codes: 0 success,
2 configuration error, 3 runtime error. Set SURFIPP_LOG=debug|info|warning
to control verbosity.
"""

import argparse
import logging
import os
import sys

from . import harness
from .scenario import ConfigError, ScenarioConfig


def _add_common(p, config_required=True):
    p.add_argument("--config", required=config_required, help="scenario YAML file")
    p.add_argument("--out", help="output directory (defaults to config output_dir)")
    p.add_argument("--seed", type=int, help="override the base seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surfipp",
        description="Informative path planning simulator for mesh-surface inspection")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single mission and export its logs")
    _add_common(p_run)
    p_run.add_argument("--kind", default="ipp", choices=("ipp", "coverage", "random"))

    for name, descr in (("compare", "compare ipp/coverage/random over paired trials"),
                        ("ablate", "compare prior covariance initializations")):
        p = sub.add_parser(name, help=descr)
        _add_common(p)
        p.add_argument("--trials", type=int, help="override trial count")
        p.add_argument("--parallel", type=int, default=1, help="worker processes")

    p_plot = sub.add_parser("plot", help="render SVG figures from experiment CSVs")
    p_plot.add_argument("results_dir", nargs="?", help="directory with band CSVs")
    _add_common(p_plot, config_required=False)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=getattr(logging, os.environ.get("SURFIPP_LOG", "warning").upper(),
                      logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            results_dir = args.results_dir or args.out
            if results_dir is None and args.config:
                results_dir = ScenarioConfig.load(args.config).output_dir
            if results_dir is None:
                print("plot: provide a results directory (positional, --out or --config)",
                      file=sys.stderr)
                return 2
            for path in harness.cmd_plot(results_dir, args.out):
                print(path)
            return 0

        config = ScenarioConfig.load(args.config)
        if args.command == "run":
            summary = harness.cmd_run(config, args.out, args.seed, args.kind)
        elif args.command == "compare":
            summary = harness.cmd_compare(config, args.out, args.trials, args.seed,
                                          args.parallel)
        else:
            summary = harness.cmd_ablate(config, args.out, args.trials, args.seed,
                                         args.parallel)
        print(f"{args.command}: ok "
              f"(outputs in {args.out or config.output_dir})")
        for key in ("final_trace", "final_rmse"):
            if key in summary:
                print(f"  {key} = {summary[key]:.6g}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure inside components
        logging.getLogger(__name__).debug("traceback", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
