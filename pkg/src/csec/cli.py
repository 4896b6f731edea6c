"""Command-line harness.

Subcommands: ``run`` (execute an experiment config), ``analyze`` (print the
step-time trade-off for a speed roster), ``selftest`` (check the worked
five-machine examples).  Exit codes: 0 ok, 2 config error, 3 infeasible,
4 unrecovered step failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from csec.assignment import cyclic_assignment, fill_assignment, loads_to_row_counts
from csec.config import ConfigError, load_config
from csec.experiment import analyze_speeds, format_analysis, run_experiment
from csec.loadopt import (
    InfeasibleStragglerTolerance,
    homogeneous_optimal_time,
    optimal_load_vector,
)
from csec.presets import SPEED_PRESETS, speed_preset
from csec.runtime import InfeasibleStep, StepFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_STEP_FAILURE = 4


def _parse_s_range(text: str) -> list[int]:
    for sep in (":", "-"):
        if sep in text:
            lo, hi = text.split(sep, 1)
            return list(range(int(lo), int(hi) + 1))
    return [int(text)]


def _resolve_speeds(spec: str) -> list[float]:
    if spec in SPEED_PRESETS:
        return speed_preset(spec)
    values = np.loadtxt(spec, delimiter=",", ndmin=1)
    return [float(v) for v in np.atleast_1d(values).ravel()]


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.output_dir:
        cfg = dataclasses.replace(cfg, output_dir=args.output_dir)
    if args.no_plots:
        cfg = dataclasses.replace(cfg, plots=False)
    try:
        written = run_experiment(cfg)
    except (InfeasibleStep, InfeasibleStragglerTolerance) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except StepFailure as exc:
        print(f"step failure: {exc}", file=sys.stderr)
        return EXIT_STEP_FAILURE
    for path in written:
        print(path)
    return EXIT_OK


def cmd_analyze(args) -> int:
    try:
        speeds = _resolve_speeds(args.speeds)
    except (OSError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if len(speeds) < args.L:
        print(f"infeasible: {len(speeds)} machines < L={args.L}", file=sys.stderr)
        return EXIT_INFEASIBLE
    rows = analyze_speeds(speeds, args.L, _parse_s_range(args.S))
    print(format_analysis(rows, speeds, args.L))
    return EXIT_OK


def _golden_checks() -> list[tuple[str, bool]]:
    """The five worked examples for a 5-machine roster with L = 3."""
    checks = []

    hom = [1.0] * 5
    checks.append(("homogeneous S=0 time 3/5",
                   abs(homogeneous_optimal_time(hom, 3, 0) - 3 / 5) < 1e-12))
    checks.append(("homogeneous S=1 time 4/5",
                   abs(homogeneous_optimal_time(hom, 3, 1) - 4 / 5) < 1e-12))
    checks.append(("homogeneous S=2 time 1",
                   abs(homogeneous_optimal_time(hom, 3, 2) - 1.0) < 1e-12))

    cyc0 = cyclic_assignment(5, 3, 0, 5)
    checks.append(("cyclic S=0 machine sets",
                   list(map(set, cyc0.machine_sets)) ==
                   [{1, 2, 3}, {2, 3, 4}, {3, 4, 5}, {4, 5, 1}, {5, 1, 2}]))
    cyc1 = cyclic_assignment(5, 3, 1, 5)
    checks.append(("cyclic S=1 machine sets",
                   list(map(set, cyc1.machine_sets)) ==
                   [{1, 2, 3, 4}, {2, 3, 4, 5}, {3, 4, 5, 1}, {4, 5, 1, 2},
                    {5, 1, 2, 3}]))

    het = [1.0, 1.0, 2.0, 2.0, 3.0]
    sol0 = optimal_load_vector(het, 3, 0)
    checks.append(("heterogeneous S=0 loads [1/3,1/3,2/3,2/3,1]",
                   bool(np.allclose(sol0.loads, [1/3, 1/3, 2/3, 2/3, 1],
                                    atol=1e-12))))
    checks.append(("heterogeneous S=0 time 1/3", abs(sol0.time - 1/3) < 1e-12))

    sol1 = optimal_load_vector(het, 3, 1)
    checks.append(("heterogeneous S=1 loads [1/2,1/2,1,1,1]",
                   bool(np.allclose(sol1.loads, [1/2, 1/2, 1, 1, 1], atol=1e-12))))
    checks.append(("heterogeneous S=1 time 1/2", abs(sol1.time - 1/2) < 1e-12))

    counts = loads_to_row_counts(sol1.loads, 2, 3, 1)
    asg = fill_assignment(counts, 4)
    checks.append(("filling S=1 gives F=2 sets {1,3,4,5},{2,3,4,5}",
                   asg.num_sets == 2 and
                   set(asg.machine_sets[0]) == {1, 3, 4, 5} and
                   set(asg.machine_sets[1]) == {2, 3, 4, 5}))
    return checks


def cmd_selftest(_args) -> int:
    checks = _golden_checks()
    failed = 0
    for name, ok in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
        failed += 0 if ok else 1
    print(f"{len(checks) - failed}/{len(checks)} golden checks passed")
    return EXIT_OK if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csec",
        description="Coded storage elastic computing experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="YAML experiment config")
    p_run.add_argument("--output-dir", help="override the config's output dir")
    p_run.add_argument("--no-plots", action="store_true",
                       help="skip figure rendering")
    p_run.set_defaults(func=cmd_run)

    p_an = sub.add_parser("analyze", help="step-time trade-off for a speed roster")
    p_an.add_argument("--speeds", required=True,
                      help=f"preset ({', '.join(sorted(SPEED_PRESETS))}) or CSV file")
    p_an.add_argument("--L", type=int, required=True, help="recovery threshold")
    p_an.add_argument("--S", default="0",
                      help="straggler tolerance, single value or range lo:hi")
    p_an.set_defaults(func=cmd_analyze)

    p_st = sub.add_parser("selftest", help="run the worked-example golden suite")
    p_st.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
