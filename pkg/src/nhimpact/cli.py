"""Command line entry point.

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 Zeno/grazing halt.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import HaltError, NHImpactError
from .runner import (
    compare_formulations,
    load_config,
    prepare,
    run_simulation,
    write_outputs,
)
from .scenarios import SCENARIOS, get_scenario

log = logging.getLogger("nhimpact")


def _cmd_list(args) -> int:
    for name in sorted(SCENARIOS):
        sc = get_scenario(name)
        params = ", ".join(f"{k}={v}" for k, v in sc.parameters.items())
        print(f"{name}: {params}")
    return 0


def _cmd_validate(args) -> int:
    config = load_config(args.config)
    scenario, spec, s0 = prepare(config)
    print(f"ok: scenario {scenario.name} (n={spec.dim}, constraints={spec.n_constraints}), "
          f"t in [{config.t0}, {config.t1}], h={config.h}, b(q0)={spec.b(s0.q):.6g}")
    return 0


def _cmd_simulate(args) -> int:
    config = load_config(args.config)
    scenario, spec, _ = prepare(config)
    try:
        traj = run_simulation(config)
    except HaltError as exc:
        if exc.trajectory is not None:
            # the event log is complete up to and including the halting impact
            for path in write_outputs(config, scenario, spec, exc.trajectory):
                log.info("wrote %s", path)
        raise
    for path in write_outputs(config, scenario, spec, traj):
        log.info("wrote %s", path)
    print(json.dumps({"events": len(traj.events), "samples": len(traj),
                      "impact_times": [ev.t_impact for ev in traj.events]}))
    return 0


def _cmd_compare(args) -> int:
    config = load_config(args.config)
    report = compare_formulations(config)
    report.pop("trajectories")
    print(json.dumps(report, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nhimpact",
        description="Nonholonomic mechanical systems with elastic wall impacts.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (
        ("simulate", _cmd_simulate, "run a simulation and write outputs"),
        ("compare", _cmd_compare, "run Lagrangian and Hamiltonian formulations and compare"),
        ("validate", _cmd_validate, "check a config and its initial state without running"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON config file")
        p.set_defaults(func=fn)
    p = sub.add_parser("list-scenarios", help="list built-in scenarios and default parameters")
    p.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NHImpactError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        traj = exc.trajectory
        if traj is not None and traj.events:
            print(f"events before halt: {[ev.t_impact for ev in traj.events]}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
