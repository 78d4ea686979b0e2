"""Command line entry point: ``mtrsvd {run,summarize,bounds,sharpness}``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .experiments import ConfigError, ExperimentConfig, default_out_dir, run, summarize

log = logging.getLogger("mtrsvd")


def _parser():
    p = argparse.ArgumentParser(prog="mtrsvd", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in ("run", "bounds", "sharpness"):
        sp = sub.add_parser(verb, help=f"{verb} experiments from a YAML config")
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--out", default=None, help="output directory (default: $MTRSVD_OUT or ./results)")
        sp.add_argument("--threads", type=int, default=1, help="worker processes")
        sp.add_argument("--seed-override", type=int, nargs="+", default=None,
                        help="replace the config's seed list")
    sp = sub.add_parser("summarize", help="aggregate results.csv over seeds")
    sp.add_argument("results", help="path to results.csv")
    sp.add_argument("--out", default=None, help="summary file (default: summary.csv next to input)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    if args.verb == "summarize":
        try:
            path = summarize(args.results, args.out)
        except (OSError, ValueError) as exc:
            log.error("%s", exc)
            return 2
        print(path)
        return 0
    try:
        cfg = ExperimentConfig.load(args.config, args.verb if args.verb != "run" else None)
        if args.seed_override is not None:
            cfg.seeds = list(args.seed_override)
        cfg.validate()
    except ConfigError as exc:
        log.error("invalid config: %s", exc)
        return 2
    out = args.out if args.out is not None else default_out_dir()
    try:
        path = run(cfg, out, threads=args.threads)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure (partial results flushed to %s): %s", out, exc)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
