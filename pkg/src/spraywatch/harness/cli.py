"""Command-line entry point.

    spraywatch run --experiment calibration --out runs/cal
    spraywatch run --config configs/example.yaml --set seeds=5 --quick
    spraywatch calibrate --spines 8 --packets-per-spine 500000
    spraywatch find-pmin --s 0.713 --rate 0.01
    spraywatch robustness --kind congestion --quick
    spraywatch coverage --workload permutation --leaves 32
    spraywatch localize-replay --quick
    spraywatch impact --seeds 2 --quick
    spraywatch build-topology --leaves 4 --spines 8 --hosts-per-leaf 2

Every subcommand exits 0 only if all of its checks passed.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import runner
from .config import apply_overrides, load_config
from .experiments import (EXPERIMENTS, coverage_experiment, find_pmin,
                          run_calibration)


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="directory for JSON/CSV outputs")


def _add_quick(p: argparse.ArgumentParser) -> None:
    p.add_argument("--quick", action="store_true",
                   help="shrunk sizes and seed counts, smoke run only")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spraywatch",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run any experiment by name")
    run.add_argument("--config", help="YAML config file")
    run.add_argument("--experiment", choices=sorted(EXPERIMENTS),
                     help="experiment name (overrides the config)")
    run.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE",
                     help="parameter override, value parsed as YAML")
    _add_out(run)
    _add_quick(run)

    cal = sub.add_parser("calibrate", help="calibrate the threshold scale")
    cal.add_argument("--spines", type=int, default=8)
    cal.add_argument("--packets-per-spine", type=int, default=500_000)
    cal.add_argument("--seeds", type=int, default=20)
    cal.add_argument("--rates", type=float, nargs="+",
                     default=[0.005, 0.004],
                     help="gray drop rates for the separation corpus")
    _add_out(cal)
    _add_quick(cal)

    pm = sub.add_parser("find-pmin",
                        help="minimum per-spine flow size for one drop rate")
    pm.add_argument("--s", type=float, required=True,
                    help="calibrated threshold scale")
    pm.add_argument("--rate", type=float, required=True)
    pm.add_argument("--spines", type=int, default=8)
    pm.add_argument("--seeds", type=int, default=20)

    rb = sub.add_parser("robustness", help="one robustness scenario family")
    rb.add_argument("--kind", required=True,
                    choices=["jitter", "preexisting", "multi_failure",
                             "congestion", "reordering"])
    rb.add_argument("--s", type=float, default=None,
                    help="threshold scale (default: quick self-calibration)")
    rb.add_argument("--seeds", type=int, default=None)
    _add_out(rb)
    _add_quick(rb)

    cov = sub.add_parser("coverage",
                         help="selector coverage for one workload shape")
    cov.add_argument("--workload", default=None,
                     choices=["alltoall", "permutation", "ring", "rings"],
                     help="omit to run the whole suite with checks")
    cov.add_argument("--leaves", type=int, default=32)
    cov.add_argument("--rounds", type=int, default=None)
    cov.add_argument("--seed", type=int, default=0)
    _add_out(cov)
    _add_quick(cov)

    loc = sub.add_parser("localize-replay",
                         help="gray-link localization matrix")
    loc.add_argument("--s", type=float, default=None)
    loc.add_argument("--oracle-only", action="store_true",
                     help="skip the packet-level lanes")
    _add_out(loc)
    _add_quick(loc)

    imp = sub.add_parser("impact",
                         help="cost of prioritizing the measured flow")
    imp.add_argument("--seeds", type=int, default=5)
    imp.add_argument("--flows", type=int, default=16)
    _add_out(imp)
    _add_quick(imp)

    bt = sub.add_parser("build-topology",
                        help="build a fabric and print its summary")
    bt.add_argument("--leaves", type=int, required=True)
    bt.add_argument("--spines", type=int, required=True)
    bt.add_argument("--hosts-per-leaf", type=int, default=1)
    bt.add_argument("--disable", action="append", default=[],
                    metavar="LINK_ID", help="disable a link by id")
    bt.add_argument("--drop", action="append", default=[],
                    metavar="LINK_ID=RATE", help="set a link's drop rate")
    return ap


def _cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else {"params": {}}
    cfg = apply_overrides(cfg, args.overrides)
    name = args.experiment or cfg.get("experiment")
    if not name:
        print("run: no experiment named (use --experiment or a config file)",
              file=sys.stderr)
        return 2
    result = runner.run_experiment(name, cfg.get("params"),
                                   args.out or cfg.get("out"),
                                   args.quick or cfg.get("quick", False))
    runner.print_checks(result)
    return 0 if result["ok"] else 1


def _cmd_calibrate(args) -> int:
    params = {"spines": args.spines,
              "packets_per_spine": args.packets_per_spine,
              "seeds": args.seeds, "drop_rates": tuple(args.rates)}
    result = runner.run_experiment("calibration", params, args.out,
                                   args.quick)
    runner.print_checks(result)
    print(f"chosen_s = {result['results']['chosen_s']:.4f}")
    return 0 if result["ok"] else 1


def _cmd_find_pmin(args) -> int:
    found = find_pmin(args.s, args.rate, args.spines, args.seeds)
    if found is None:
        print(f"no size up to 2^20 per spine works at rate {args.rate}")
        return 1
    print(f"p_min = {found} packets per spine "
          f"({found * args.spines} total) at rate {args.rate}, s={args.s}")
    return 0


def _cmd_robustness(args) -> int:
    params = {"kind": args.kind, "chosen_s": args.s}
    if args.seeds is not None:
        params["seeds"] = args.seeds
    result = runner.run_experiment("robustness", params, args.out, args.quick)
    runner.print_checks(result)
    return 0 if result["ok"] else 1


def _cmd_coverage(args) -> int:
    if args.workload:
        res = coverage_experiment(args.workload, args.leaves, args.rounds,
                                  args.seed)
        print(json.dumps(res, indent=2))
        return 0
    params = {"leaves": args.leaves, "seed": args.seed}
    result = runner.run_experiment("coverage", params, args.out, args.quick)
    runner.print_checks(result)
    return 0 if result["ok"] else 1


def _cmd_localize(args) -> int:
    params = {"chosen_s": args.s, "full": not args.oracle_only}
    result = runner.run_experiment("localization", params, args.out,
                                   args.quick)
    runner.print_checks(result)
    return 0 if result["ok"] else 1


def _cmd_impact(args) -> int:
    params = {"seeds": args.seeds, "flows": args.flows}
    result = runner.run_experiment("impact", params, args.out, args.quick)
    runner.print_checks(result)
    return 0 if result["ok"] else 1


def _cmd_build_topology(args) -> int:
    from ..topology import build_fat_tree, set_link_state
    topo = build_fat_tree(args.leaves, args.spines, args.hosts_per_leaf)
    for link_id in args.disable:
        set_link_state(topo, link_id, enabled=False)
    for text in args.drop:
        link_id, sep, rate = text.partition("=")
        if not sep:
            print(f"--drop expects LINK_ID=RATE, got {text!r}",
                  file=sys.stderr)
            return 2
        set_link_state(topo, link_id, drop_rate=float(rate))
    degraded = {lid: {"enabled": l.enabled, "drop_rate": l.drop_rate}
                for lid, l in sorted(topo.links.items())
                if not l.enabled or l.drop_rate}
    print(json.dumps({
        "leaves": topo.n_leaves, "spines": topo.n_spines,
        "hosts": topo.n_hosts, "links": len(topo.links),
        "usable_spines_0_to_1": list(topo.usable_spines(0, 1 % topo.n_leaves)),
        "degraded_links": degraded,
    }, indent=2))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "calibrate": _cmd_calibrate,
        "find-pmin": _cmd_find_pmin,
        "robustness": _cmd_robustness,
        "coverage": _cmd_coverage,
        "localize-replay": _cmd_localize,
        "impact": _cmd_impact,
        "build-topology": _cmd_build_topology,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
