"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .errors import ConfigError, CpsimError
from .matrix_analysis import LINKAGES
from .pipeline import COMMANDS, EMPTY_SET_POLICIES, NamedWindow, PipelineConfig, load_config, run_pipeline

_HELP = {
    "detect": "sample change points of every series and write posteriors",
    "distances": "detect, then write the MJ-Wasserstein distance matrix",
    "audit": "distances plus norms, triangle test and clustering",
    "market": "correlation histograms, rolling PCA and trajectory norms",
    "all": "every step",
}

# flag -> SamplerConfig field
_SAMPLER_FLAGS = {
    "iterations": "n_iterations",
    "burnin": "n_burnin",
    "tmin": "t_min",
    "max_segments": "max_segments",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON config file; flags override it")
    common.add_argument("--input", help="wide price CSV: date column, then one column per ticker")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--p", type=float, help="power mean order of the set distance")
    common.add_argument("--q", type=float, help="Wasserstein order")
    common.add_argument(
        "--window", action="append", metavar="NAME=START..END", help="named date range, repeatable"
    )
    common.add_argument("--linkage", choices=LINKAGES)
    common.add_argument("--empty-set-policy", choices=EMPTY_SET_POLICIES, dest="empty_set_policy")
    common.add_argument("--iterations", type=int)
    common.add_argument("--burnin", type=int)
    common.add_argument("--tmin", type=int)
    common.add_argument("--max-segments", type=int, dest="max_segments")
    common.add_argument("--jobs", type=int, help="worker processes for sampling")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="cpsim", description="Change-point similarity of time series.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=_HELP[name])
    return parser


def config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    changes = {}
    for key in ("input", "out", "seed", "p", "q", "linkage", "empty_set_policy", "jobs"):
        v = getattr(args, key)
        if v is not None:
            changes[key] = v
    if args.window:
        changes["windows"] = tuple(NamedWindow.parse(w) for w in args.window)
    sampler_changes = {
        field: getattr(args, flag) for flag, field in _SAMPLER_FLAGS.items() if getattr(args, flag) is not None
    }
    if sampler_changes:
        changes["sampler"] = dataclasses.replace(cfg.sampler, **sampler_changes)
    return cfg.replace(**changes)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s"
        )
        report = run_pipeline(config_from_args(args), args.command)
    except CpsimError as exc:
        print(f"cpsim: error: {exc}", file=sys.stderr)
        return exc.exit_code
    for f in report["files"]:
        print(f"{f['sha256']}  {f['path']}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
