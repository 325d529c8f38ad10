"""Command-line entry point.

Subcommands: plan, validate, bench, render, oracle.  Exit codes: 0 ok,
1 malformed input, 2 incomplete plan (plan) or inconclusive oracle,
3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .bench import BenchError, bfs_oracle, run_suite, write_report
from .core import Instance, ModelError
from .planner import multi_agent_reramp
from .validator import plan_from_json_dict, plan_to_json_dict, simulate, validate_plan

EXIT_OK = 0
EXIT_MALFORMED = 1
EXIT_INCOMPLETE = 2
EXIT_VIOLATION = 3


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read {path}: {exc}") from exc


def _load_instance(path: str) -> Instance:
    return Instance.from_json_dict(_load_json(path))


def cmd_plan(args) -> int:
    inst = _load_instance(args.instance)
    result = multi_agent_reramp(inst, i_r=args.i_r)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(plan_to_json_dict(result.plan), f)
            f.write("\n")
    _, metrics = validate_plan(inst, result.plan)
    print(
        f"makespan={metrics.makespan} soc={metrics.sum_of_costs} "
        f"robots={metrics.robots} complete={str(result.complete).lower()}"
    )
    return EXIT_OK if result.complete else EXIT_INCOMPLETE


def cmd_validate(args) -> int:
    inst = _load_instance(args.instance)
    plan = plan_from_json_dict(_load_json(args.plan))
    report, _ = validate_plan(inst, plan, deconstruct=args.deconstruct)
    print(json.dumps(report.to_json_dict(), sort_keys=True))
    return EXIT_OK if report.ok else EXIT_VIOLATION


def cmd_render(args) -> int:
    inst = _load_instance(args.instance)
    plan = plan_from_json_dict(_load_json(args.plan))
    report, _ = validate_plan(inst, plan, deconstruct=args.deconstruct)
    if not report.ok:
        print(json.dumps(report.to_json_dict(), sort_keys=True))
        return EXIT_VIOLATION
    os.makedirs(args.out, exist_ok=True)
    horizon = plan.horizon
    stride = args.stride or max(1, horizon)
    wanted = {t for t in range(0, horizon, stride)} | {horizon}
    count = 0
    for t, world, _batch, _v in simulate(inst, plan, deconstruct=args.deconstruct):
        if t not in wanted:
            continue
        frame = {
            "t": t,
            "heights": [list(col) for col in world.heights],
            "agents": {
                str(aid): {"pos": list(st.pos), "carrying": st.carrying}
                for aid, st in world.agents.items()
            },
        }
        path = os.path.join(args.out, f"frame_{t:06d}.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(frame, f)
            f.write("\n")
        count += 1
    print(f"frames={count} horizon={horizon} stride={stride}")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _load_json(args.suite)
    if args.reps is not None:
        config["repetitions"] = args.reps
    if args.i_r is not None:
        config["i_r"] = args.i_r
    if args.seed is not None:
        for spec in config.get("instances", []):
            if isinstance(spec, dict) and spec.get("gen") == "random":
                spec.setdefault("args", {})["seed"] = args.seed
    report = run_suite(config)
    csv_path, json_path = write_report(report, args.out or ".")
    print(f"rows={len(report.rows)} csv={csv_path} json={json_path}")
    return EXIT_OK if all(r.valid for r in report.rows) else EXIT_VIOLATION


def cmd_oracle(args) -> int:
    inst = _load_instance(args.instance)
    try:
        res = bfs_oracle(inst, state_limit=args.state_limit)
    except BenchError as exc:
        if exc.code == "limit-exceeded":
            print(json.dumps({"buildable": None, "error": "limit-exceeded"}))
            return EXIT_INCOMPLETE
        raise
    print(json.dumps({
        "buildable": res.buildable,
        "optimal_makespan": res.optimal_makespan,
        "explored_states": res.explored_states,
    }, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="reramp",
        description="Collective-construction planning with reversible ramps",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan construction of an instance")
    p.add_argument("instance")
    p.add_argument("--i-r", dest="i_r", type=int, default=1,
                   help="max side-ramp recursion (default 1)")
    p.add_argument("--out", help="write the plan JSON here")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("validate", help="check a plan against an instance")
    p.add_argument("instance")
    p.add_argument("plan")
    p.add_argument("--deconstruct", action="store_true",
                   help="validate as a deconstruction plan")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("render", help="export world frames along a plan")
    p.add_argument("instance")
    p.add_argument("plan")
    p.add_argument("--out", required=True)
    p.add_argument("--stride", type=int, default=0,
                   help="timesteps between frames (default: horizon)")
    p.add_argument("--deconstruct", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bench", help="run a benchmark suite config")
    p.add_argument("suite")
    p.add_argument("--reps", type=int, default=None,
                   help="timing repetitions per instance (default 20)")
    p.add_argument("--i-r", dest="i_r", type=int, default=None)
    p.add_argument("--seed", type=int, default=None,
                   help="override the seed of random-generator suite entries")
    p.add_argument("--out", help="report directory (default .)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="exact buildability check (micro instances)")
    p.add_argument("instance")
    p.add_argument("--state-limit", type=int, default=2_000_000)
    p.set_defaults(func=cmd_oracle)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelError, BenchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
