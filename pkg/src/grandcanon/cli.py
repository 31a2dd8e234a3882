"""Command-line entry point.

    grandcanon run CONFIG [--seed N] [--out DIR] [--parallel K]
    grandcanon suite      [--seed N] [--out DIR] [--parallel K]

Seed precedence: ``--seed``, then ``GRANDCANON_SEED``, then the config file.
Exit status: 0 when every PASS/FAIL check passes, 1 when any fails, 2 for an
invalid configuration.
"""

from __future__ import annotations

import argparse
import os
import sys

from grandcanon import config, experiments

SEED_ENV = "GRANDCANON_SEED"


def _parser():
    p = argparse.ArgumentParser(prog="grandcanon", description="Grand-canonical reduction verification runner")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (overrides config and environment)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--parallel", type=int, default=1, metavar="K", help="worker threads for trials")
    run = sub.add_parser("run", parents=[common], help="run the experiment named in a config file")
    run.add_argument("config")
    sub.add_parser("suite", parents=[common], help="run the full suite with default parameters")
    return p


def _resolve_seed(args, cfg):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise config.ConfigError([(0, f"{SEED_ENV} must be an integer, got {env!r}")]) from None
    return cfg.master_seed


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = config.load(args.config)
        else:
            cfg = config.defaults()
        cfg.master_seed = _resolve_seed(args, cfg)
        if args.out:
            cfg.output_dir = args.out
        if args.parallel < 1:
            raise config.ConfigError([(0, "--parallel must be >= 1")])
    except config.ConfigError as exc:
        print(f"grandcanon: invalid configuration\n{exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"grandcanon: cannot read config: {exc}", file=sys.stderr)
        return 2

    checks = experiments.run_experiment(cfg, cfg.output_dir, workers=args.parallel)
    for chk in checks:
        print(chk.line())
    failed = [c for c in checks if c.status == "FAIL"]
    n_graded = sum(c.status != "INFO" for c in checks)
    print(f"{n_graded - len(failed)}/{n_graded} checks passed; report in {os.path.join(cfg.output_dir, 'report.txt')}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
