"""
``ssbm`` command line.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 degenerate or
non-convergent fit (the result file is still written, with a flag).
"""

import argparse
import logging
import os
import sys

from . import __version__, harness
from .errors import ConfigError, DegenerateModel, SsbmError
from .learner import FitConfig

logger = logging.getLogger("ssbm")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_DEGENERATE = 0, 1, 2, 3


def _resolve_seed(value):
    if value is not None:
        return value
    env = os.environ.get("SSBM_SEED")
    if env is None or env == "":
        return None
    try:
        return int(env)
    except ValueError:
        raise ConfigError("SSBM_SEED", f"not an integer: {env!r}") from None


def _add_fit_options(parser):
    parser.add_argument("--k-min", type=int, default=None)
    parser.add_argument("--k-max", type=int, default=None,
                        help="default floor(sqrt(n))")
    parser.add_argument("--epsilon", type=float, default=None)
    parser.add_argument("--restarts", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)


def _fit_overrides(args):
    return {"k_min": args.k_min, "k_max": args.k_max,
            "epsilon": args.epsilon, "restarts": args.restarts}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ssbm", description="Block structure discovery in signed "
                                 "networks.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="sample a synthetic network")
    gen.add_argument("--config", required=True, help="network INI file")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--seed", type=int, default=None)

    fit = sub.add_parser("fit", help="fit a signed edge list")
    fit.add_argument("graph", help="edge-list file")
    fit.add_argument("--out", required=True, help="result JSON path")
    fit.add_argument("--config", default=None,
                     help="INI file with a [fit] section")
    fit.add_argument("--seed", type=int, default=None)
    _add_fit_options(fit)

    ev = sub.add_parser("eval", help="score a fit result against a truth file")
    ev.add_argument("result", help="fit result JSON")
    ev.add_argument("truth", help="'node block' truth file")
    ev.add_argument("--out", default=None, help="metrics JSON path")

    bench = sub.add_parser("bench", help="run a parameter sweep suite")
    bench.add_argument("--config", required=True, help="suite INI file")
    bench.add_argument("--out", required=True, help="output directory")
    bench.add_argument("--seed", type=int, default=None,
                       help="overrides every sweep's base_seed")
    _add_fit_options(bench)
    return parser


def _fit_config(args, seed):
    section = {}
    if args.config:
        parser = harness._read_ini(args.config)
        if parser.has_section("fit"):
            section = dict(parser["fit"])
    overrides = _fit_overrides(args)
    overrides["seed"] = seed
    overrides["workers"] = args.workers
    return harness.fit_config_from_mapping(section, **overrides)


def run(args):
    seed = _resolve_seed(getattr(args, "seed", None))
    if args.command == "generate":
        manifest = harness.cmd_generate(args.config, args.out, seed=seed)
        print(f"generated {manifest['summary']['n']} nodes, "
              f"{manifest['summary']['edges']} edges -> {args.out}")
        return EXIT_OK
    if args.command == "fit":
        config = _fit_config(args, seed if seed is not None else 0)
        record = harness.cmd_fit(args.graph, args.out, config)
        result = record["result"]
        print(f"k_found={result['k_found']} cost={result['best_cost']:.4f} "
              f"-> {args.out}")
        if not result["converged"]:
            logger.error("fit hit the sweep cap; result flagged %s",
                         result["flags"])
            return EXIT_DEGENERATE
        return EXIT_OK
    if args.command == "eval":
        metrics = harness.cmd_eval(args.result, args.truth, args.out)
        print(f"nmi={metrics['nmi']:.6f} k_true={metrics['k_true']} "
              f"k_found={metrics['k_found']}")
        return EXIT_OK
    if args.command == "bench":
        summary = harness.cmd_bench(args.config, args.out,
                                    workers=args.workers or 1, base_seed=seed,
                                    **_fit_overrides(args))
        for name, sweep in summary["sweeps"].items():
            medians = [p["median_nmi"] for p in sweep["points"]]
            print(f"{name}: median nmi per point {medians}")
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: "
                                            "%(message)s")
    try:
        return run(args)
    except DegenerateModel as exc:
        print(f"ssbm: degenerate model: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ConfigError, SsbmError, ValueError) as exc:
        print(f"ssbm: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        name = exc.filename or ""
        print(f"ssbm: I/O error: {name}: {exc.strerror or exc}",
              file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
