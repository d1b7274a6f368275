"""Command line entry point.

One subcommand per pipeline stage plus run-all. Exit codes: 0 on success,
1 when a stage fails on its inputs (unsatisfiable scene, failing physics,
missing upstream artifacts), 2 for usage and configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, EnvcoverError, SchemaViolation
from .pipeline import (
    RunPaths,
    resolve_bundle,
    run_all,
    stage_build,
    stage_collect,
    stage_derive,
    stage_report,
    stage_simulate,
    stage_validate,
)
from .simulation import DEFAULT_BUDGET

USAGE_EXIT = 2
FAILURE_EXIT = 1


def _add_task_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--task",
        required=True,
        help="task bundle: task.json or the directory holding it",
    )
    parser.add_argument("--cassette", help="exchange cassette (default: cassette.json next to the task)")
    parser.add_argument("--catalog", help="asset catalog (default: catalog.json next to the task)")


def _add_out_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", required=True, help="run directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="envcover",
        description="derive decision plans, select trajectories, build and "
        "check scenes, and exercise policies against them",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", help="turn the task into checked decision plans")
    _add_task_flags(p)
    _add_out_flag(p)
    p.add_argument("--live-endpoint", help="HTTP endpoint for live plan generation")
    p.add_argument("--max-rounds", type=int, default=3)

    p = sub.add_parser("collect", help="enumerate trajectories and pick a minimal set")
    _add_out_flag(p)

    p = sub.add_parser("build", help="solve a scene for each selected trajectory")
    _add_task_flags(p)
    _add_out_flag(p)
    p.add_argument("--live-endpoint", help="HTTP endpoint for live scene generation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=float, default=0.1, help="placement grid step in meters")
    p.add_argument("--jobs", type=int, default=1, help="parallel scene builds")

    p = sub.add_parser("validate", help="re-check built scenes for physical plausibility")
    _add_task_flags(p)
    _add_out_flag(p)

    p = sub.add_parser("simulate", help="run every bundled policy against every scene")
    _add_task_flags(p)
    _add_out_flag(p)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="tick budget per run")

    p = sub.add_parser("report", help="aggregate coverage and outcome metrics")
    _add_out_flag(p)

    p = sub.add_parser("run-all", help="all stages in order")
    _add_task_flags(p)
    _add_out_flag(p)
    p.add_argument("--live-endpoint", help="HTTP endpoint for live generation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=float, default=0.1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--max-rounds", type=int, default=3)
    return parser


def _validate_numbers(args) -> None:
    for name in ("seed", "grid", "jobs", "budget", "max_rounds"):
        if not hasattr(args, name):
            continue
        value = getattr(args, name)
        if name == "seed":
            continue
        if value <= 0:
            raise ConfigError(f"--{name.replace('_', '-')} must be positive, got {value}")


def _dispatch(args) -> dict | None:
    paths = RunPaths(args.out) if hasattr(args, "out") else None
    if args.command == "collect":
        selected = stage_collect(paths)
        return {"selected": len(selected)}
    if args.command == "report":
        return stage_report(paths)

    bundle = resolve_bundle(args.task, cassette=args.cassette, catalog=args.catalog)
    if args.command == "derive":
        result = stage_derive(paths, bundle, args.live_endpoint, args.max_rounds)
        summary = {
            "status": result.status,
            "rounds_used": result.rounds_used,
            "subtasks": len(result.subtasks),
            "violations": len(result.report.violations),
        }
        if result.status != "ok":
            print(json.dumps(summary, indent=2, sort_keys=True))
            raise EnvcoverError("derivation kept violations after refinement")
        return summary
    if args.command == "build":
        envs = stage_build(
            paths,
            bundle,
            args.live_endpoint,
            seed=args.seed,
            grid=args.grid,
            jobs=args.jobs,
        )
        return {"environments": len(envs), "relaxed": sum(len(e.relaxed_relations) for e in envs)}
    if args.command == "validate":
        result = stage_validate(paths, bundle)
        summary = {
            "physics_pass_rate": result["physics"]["pass_rate"],
            "validity_rate": result["validity"]["rate"],
        }
        if result["physics"]["pass_rate"] < 1.0:
            print(json.dumps(summary, indent=2, sort_keys=True))
            raise EnvcoverError("at least one scene failed the physics check")
        return summary
    if args.command == "simulate":
        doc = stage_simulate(paths, bundle, budget=args.budget)
        return {
            "policies": len(doc["policies"]),
            "fault_detection_rate": doc["fault_detection_rate"],
            "total_ticks": doc["total_ticks"],
        }
    if args.command == "run-all":
        return run_all(
            args.out,
            args.task,
            cassette=args.cassette,
            catalog=args.catalog,
            live_endpoint=args.live_endpoint,
            seed=args.seed,
            grid=args.grid,
            jobs=args.jobs,
            budget=args.budget,
            max_rounds=args.max_rounds,
        )
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _validate_numbers(args)
        summary = _dispatch(args)
    except (ConfigError, SchemaViolation) as exc:
        print(f"envcover: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except EnvcoverError as exc:
        print(f"envcover: {exc}", file=sys.stderr)
        return FAILURE_EXIT
    if summary is not None:
        print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
