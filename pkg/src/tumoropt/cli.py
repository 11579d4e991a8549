"""Command-line experiment driver.

Verbs: run-uncontrolled, run-control, probe, check-gradient, convergence.
Each takes one or more config files; --jobs runs independent configs
concurrently (their output directories must differ).  Exit codes: 0 ok,
2 configuration error, 3 solver/optimization error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import sys

from .config import parse_config
from .errors import (ConfigError, NumericError, OptimizationError,
                     RunnerError, SolverError, SteppingError)
from .runner import (run_check_gradient, run_convergence, run_optimal_control,
                     run_probe, run_uncontrolled)

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tumoropt",
        description="Chemotaxis tumor growth: forward runs and optimal "
                    "therapy scheduling.")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("configs", nargs="+", help="experiment config file(s)")
        p.add_argument("--out", default=None,
                       help="output directory (overrides output.dir)")
        p.add_argument("--stride", type=int, default=None,
                       help="snapshot stride in steps (overrides "
                            "output.stride)")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized checks")
        p.add_argument("--jobs", type=int, default=1,
                       help="run this many configs concurrently")

    common(sub.add_parser("run-uncontrolled",
                          help="forward run with zero therapy"))
    common(sub.add_parser("run-control",
                          help="optimize the therapy schedules"))
    probe = sub.add_parser("probe",
                           help="perturb one optimal control and record J")
    common(probe)
    probe.add_argument("--control", choices=("c", "s"), required=True)
    probe.add_argument("--perts", default=None,
                       help="comma-separated perturbation list")
    common(sub.add_parser("check-gradient",
                          help="duality and finite-difference certification"))
    common(sub.add_parser("convergence",
                          help="manufactured-solution convergence orders"))
    return parser


def _dispatch(args, config_path):
    cfg = parse_config(config_path)
    if args.out is not None:
        cfg.out_dir = args.out
    if args.stride is not None:
        cfg.stride = args.stride
    if args.verb == "run-uncontrolled":
        out = run_uncontrolled(cfg)
        print(f"wrote {out}")
    elif args.verb == "run-control":
        out, result = run_optimal_control(cfg)
        print(f"wrote {out}; best J = {result.best_cost:.8g} after "
              f"{len(result.history)} iterations"
              + (" (stabilized)" if result.stopped_by_stability else ""))
    elif args.verb == "probe":
        perts = None
        if args.perts:
            perts = tuple(float(p) for p in args.perts.split(","))
        out, result = run_probe(cfg, args.control, perts=perts)
        print(f"wrote {out}; probed around J = {result.best_cost:.8g}")
    elif args.verb == "check-gradient":
        out, worst = run_check_gradient(cfg, seed=args.seed)
        print(f"wrote {out}; worst duality mismatch {worst:.3e}")
    elif args.verb == "convergence":
        out, (t_orders, s_orders) = run_convergence(cfg)
        print(f"wrote {out}; temporal orders {t_orders.round(3)}, "
              f"spatial orders {s_orders.round(3)}")
    else:  # unreachable behind argparse
        raise ConfigError(f"unknown verb {args.verb}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if len(args.configs) > 1:
            dirs = [parse_config(c).out_dir for c in args.configs]
            if args.out is not None:
                raise ConfigError(
                    "--out cannot be combined with multiple configs")
            if len(set(dirs)) != len(dirs):
                raise ConfigError(
                    "batch configs must use distinct output directories")
        if args.jobs > 1 and len(args.configs) > 1:
            with concurrent.futures.ProcessPoolExecutor(
                    max_workers=args.jobs) as pool:
                futures = [pool.submit(_worker, args, c)
                           for c in args.configs]
                for f in futures:
                    f.result()
        else:
            for config_path in args.configs:
                _dispatch(args, config_path)
    except (ConfigError, ValueError) as exc:
        # bad values surface as ValueError from the domain constructors;
        # they always trace back to the configuration
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, SteppingError, OptimizationError,
            NumericError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (RunnerError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


def _worker(args, config_path):
    _dispatch(args, config_path)


if __name__ == "__main__":
    sys.exit(main())
