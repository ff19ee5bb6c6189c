import argparse
import logging
import sys
from typing import List, Optional

from twrbf.bench.config import RunMode, build_config, read_config_file
from twrbf.bench.harness import convergence_trace, format_summary, run, summarize
from twrbf.errors import ConfigError, SolverError

log = logging.getLogger("twrbf")


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=str, help="flat key = value config file")
    p.add_argument("--pairs", type=int, help="number of user pairs K")
    p.add_argument("--antennas", type=int, help="relay antennas M")
    p.add_argument(
        "--user-antennas", type=str, help="comma separated antennas per user (mimo)"
    )
    p.add_argument("--snr-db", type=str, help="comma separated SNR points in dB")
    p.add_argument("--trials", type=int, help="Monte-Carlo trials")
    p.add_argument("--seed", type=int, help="run seed")
    p.add_argument("--eps", type=float, help="polyblock / alternating tolerance")
    p.add_argument("--tol", type=float, help="Dinkelbach stopping tolerance")
    p.add_argument("--weights", type=str, help="comma separated utility weights")
    p.add_argument("--targets", type=str, help="comma separated SINR targets")
    p.add_argument("--schemes", type=str, help="comma separated scheme names")
    p.add_argument("--out", type=str, help="results file (.csv, .csv.gz, ...)")
    p.add_argument("--trace-out", type=str, help="convergence trace file")
    p.add_argument("--workers", type=int, help="processes for independent trials")
    p.add_argument("--utility", choices=["rate", "mse", "ser"])
    p.add_argument("--modulation", choices=["bpsk", "qpsk"])
    p.add_argument("--max-outer", type=int, help="alternating iteration cap")
    p.add_argument(
        "--poly-seconds",
        type=float,
        help="wall-clock limit per polyblock run (keeps the incumbent)",
    )
    p.add_argument(
        "--timing",
        action="store_const",
        const=True,
        help="record wall-clock runtime per scheme (output is then not reproducible)",
    )
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twrbf-cli",
        description="Benchmark two-way relay beamforming schemes.",
    )
    sub = parser.add_subparsers(dest="mode", metavar="mode", required=True)
    common = _common_flags()
    for mode in RunMode:
        sub.add_parser(mode.value, parents=[common], help=f"run the {mode.value} mode")
    return parser


def _configure_logging(verbose: int, quiet: bool) -> None:
    if quiet:
        level = logging.ERROR
    elif verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


_OVERRIDES = (
    "pairs",
    "antennas",
    "user_antennas",
    "snr_db",
    "trials",
    "seed",
    "eps",
    "tol",
    "weights",
    "targets",
    "schemes",
    "out",
    "trace_out",
    "workers",
    "utility",
    "modulation",
    "max_outer",
    "poly_seconds",
    "timing",
)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)

    try:
        file_values = read_config_file(args.config) if args.config else {}
        overrides = {name: getattr(args, name) for name in _OVERRIDES}
        config = build_config(file_values, mode=args.mode, **overrides)
    except ConfigError as e:
        print(f"twrbf-cli: error: {e}", file=sys.stderr)
        return 2

    try:
        records = run(config)
        if config.trace_out:
            convergence_trace(config)
    except SolverError as e:
        log.error("run aborted: %s", e)
        return 1
    except (ConfigError, OSError) as e:
        print(f"twrbf-cli: error: {e}", file=sys.stderr)
        return 2

    if not args.quiet:
        print(format_summary(summarize(records)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
