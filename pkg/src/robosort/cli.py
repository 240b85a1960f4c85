"""Command line: ``robosort <kind> [--plan FILE] [--seed N] [--workers N] [--paper-scale] [--out DIR]``."""
from __future__ import annotations

import argparse
import json
import sys
import time

from .experiments import PLAN_KINDS, PlanError, load_plan, run_plan, write_outputs

_HELP = {
    "simulate": "run one simulation configuration with replications",
    "benchmark": "rhythmic control vs cooperative A* over robot counts",
    "estimate": "closed-form throughput estimates over maps and staffing",
    "calibrate": "fit the attenuation coefficients from simulation",
    "optimize": "solve one layout design scenario",
    "sweep": "layout optimizer over demand and unit-cost grids",
    "validate": "formula vs simulation errors over the staffing sweep",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robosort", description=__doc__)
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in PLAN_KINDS:
        sp = sub.add_parser(kind, help=_HELP[kind])
        sp.add_argument("--plan", help="JSON plan file; missing keys take the defaults")
        sp.add_argument("--seed", type=int, help="master seed (overrides the plan)")
        sp.add_argument("--workers", type=int, default=1, help="plan cells run concurrently")
        sp.add_argument("--paper-scale", action="store_true",
                        help="full-length windows, replication counts and map sets")
        sp.add_argument("--out", default=f"results/{kind}", help="output directory")
        sp.add_argument("--print-plan", action="store_true", help="print the resolved plan and exit")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        plan = load_plan(args.kind, args.plan, args.seed, args.workers, args.paper_scale)
    except (PlanError, OSError, json.JSONDecodeError) as exc:
        print(f"robosort: {exc}", file=sys.stderr)
        return 2
    if args.print_plan:
        print(json.dumps(plan.resolved(), indent=1, sort_keys=True))
        return 0
    t0 = time.perf_counter()
    result = run_plan(plan)
    out = write_outputs(result, plan, args.out, time.perf_counter() - t0)
    for t in result.tables:
        failed = sum(1 for r in t.rows if str(r.get("status", "ok")).startswith("failed"))
        extra = f", {failed} failed" if failed else ""
        print(f"{out / (t.name + '.csv')}: {len(t.rows)} rows{extra}")
    for note in result.notes:
        print(f"note: {note}")
    print(f"{out / 'manifest.json'}: config {plan.config_hash}, seed {plan.seed}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
