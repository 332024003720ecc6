"""Command-line entry points: run, sweep, verify."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import driver, mobility, online, runio


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uavcast",
        description="Joint UAV trajectory and NOMA multicast power optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one scenario")
    run_p.add_argument("--mode", required=True,
                       choices=["offline-fixed", "offline-mobile", "online"])
    run_p.add_argument("--scenario", required=True,
                       help="scenario file path or shipped scenario name")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--out", required=True)
    run_p.add_argument("--no-reachability", action="store_true",
                       help="drop the online remaining-distance constraint")
    run_p.add_argument("--lambda", dest="poisson_lambda", type=float, default=None,
                       help="per-slot Poisson group-size parameter (online)")

    sweep_p = sub.add_parser("sweep", help="run one scenario over a parameter grid")
    sweep_p.add_argument("--param", required=True, choices=list(driver.SWEEP_PARAMS))
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated parameter values")
    sweep_p.add_argument("--seeds", required=True, help="comma-separated seeds")
    sweep_p.add_argument("--scenario", required=True)
    sweep_p.add_argument("--out", required=True)
    sweep_p.add_argument("--mode", default="offline-fixed",
                         choices=["offline-fixed", "offline-mobile", "online"])
    sweep_p.add_argument("--no-reachability", action="store_true")

    verify_p = sub.add_parser("verify", help="re-check a saved run directory")
    verify_p.add_argument("--out", required=True)
    return parser


def _cmd_run(args) -> int:
    config, pinned = runio.load_scenario(args.scenario)
    if args.seed is not None:
        config = replace(config, rng_seed=args.seed)
    if args.poisson_lambda is not None:
        config = replace(config, poisson_lambda=args.poisson_lambda)
    config.validate()

    if args.mode == "online":
        result = online.run_online(config, reachability=not args.no_reachability,
                                   trace=pinned)
        runio.save_result(result, args.out, config)
    else:
        trace = pinned if pinned is not None else mobility.generate_trace(config)
        result = driver.run_offline(config, trace, mode=args.mode)
        runio.save_result(result, args.out, config, trace=trace)
    print(f"objective_nats={result.objective:.9g} converged={result.converged} "
          f"out={args.out}")
    return 0


def _cmd_sweep(args) -> int:
    config, _ = runio.load_scenario(args.scenario)
    values = [float(v) for v in args.values.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")]
    rows = driver.sweep(config, args.param, values, seeds, mode=args.mode,
                        reachability=not args.no_reachability)
    path = runio.save_sweep(rows, args.out)
    failures = [r for r in rows if r.error]
    print(f"wrote {len(rows)} rows to {path} ({len(failures)} failed)")
    return 0 if not failures else 1


def _cmd_verify(args) -> int:
    problems = runio.verify_result(args.out)
    if problems:
        for p in problems:
            print(f"verify: {p}", file=sys.stderr)
        return 1
    print("verify: ok")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_verify(args)
    except (runio.LoadError, ValueError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
