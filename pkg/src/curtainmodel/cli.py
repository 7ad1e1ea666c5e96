"""Command-line entry point.

    curtains run <scenario.json | bundled-name> [--out DIR] [--csv]
             [--seed S] [--budget K]
    curtains list
    curtains oracle --family FAMILY.json --pair '[[x...],[y...]]' --L N

Exit code 0 iff the run produced no falsification events.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .oracle import family_from_spec, longest_L_chain
from .scenarios import (ScenarioError, list_bundled, load_bundled,
                        run_scenario)
from .spaces import point_from_spec


def _cmd_run(args) -> int:
    target = args.scenario
    if os.path.exists(target):
        doc = target
    else:
        try:
            doc = load_bundled(target)
        except ScenarioError:
            print(f"error: {target!r} is neither a file nor a bundled "
                  f"scenario (try `curtains list`)", file=sys.stderr)
            return 2
    try:
        report = run_scenario(doc, out_dir=args.out, csv_out=args.csv,
                              seed=args.seed, budget_scale=args.budget)
    except ScenarioError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return 2
    if args.out is None:
        print(report.to_json())
    else:
        print(f"report written under {args.out}")
    if not report.passed:
        print(f"FALSIFICATION EVENTS: {len(report.falsifications)}",
              file=sys.stderr)
        return 1
    return 0


def _cmd_list(_args) -> int:
    for name in list_bundled():
        print(name)
    return 0


def _cmd_oracle(args) -> int:
    with open(args.family) as fh:
        fam = family_from_spec(json.load(fh))
    pair = json.loads(args.pair)
    x = point_from_spec(fam.space, pair[0])
    y = point_from_spec(fam.space, pair[1])
    card, chain = longest_L_chain(x, y, args.L, fam)
    print(json.dumps({"cardinality": card,
                      "chain": chain.to_spec(),
                      "family_size": len(fam)}, sort_keys=True, indent=2))
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="curtains",
                                 description="curtain models of CAT(0) spaces")
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario file or bundled name")
    run_p.add_argument("scenario")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--csv", action="store_true", help="also write CSV")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    run_p.add_argument("--budget", type=int, default=1,
                       help="search budget scale (0=caps, 1=default, 2=+family)")
    run_p.set_defaults(func=_cmd_run)

    list_p = sub.add_parser("list", help="list bundled scenarios")
    list_p.set_defaults(func=_cmd_list)

    oracle_p = sub.add_parser("oracle",
                              help="longest separating L-chain from a saved family")
    oracle_p.add_argument("--family", required=True, help="family JSON file")
    oracle_p.add_argument("--pair", required=True,
                          help="JSON pair of point coordinates")
    oracle_p.add_argument("--L", type=int, required=True)
    oracle_p.set_defaults(func=_cmd_oracle)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
