"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 config error, 4 data error,
5 solver failure, 6 output error. Log verbosity comes from the
``EMPC_LOG_LEVEL`` environment variable (e.g. ``INFO`` or ``DEBUG``).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

from .cases import parse_case_spec
from .controllers import PlantData
from .io import (ConfigError, DataError, OutputError, build_manifest, emit_comparison,
                 emit_outputs, load_scenario_data, parse_config, report_text,
                 resolve_log_level, validate_case, write_timeseries)
from .optimizer import SolverError, lower
from .sim import SimulationError, run_closed_loop, run_controller
from .synthetic import synthetic_series
from .tariff import PeakState
from .timegrid import build_grid

logger = logging.getLogger("empc_dispatch")

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_SOLVER = 5
EXIT_OUTPUT = 6


def _run_one(config, load, pv, out_dir):
    started = time.perf_counter()
    trace, report = run_closed_loop(config, load, pv, progress_every=config.grid().steps_per_day * 7)
    wall = time.perf_counter() - started
    manifest = build_manifest(config, trace, wall)
    emit_outputs(trace, report, manifest, out_dir)
    return trace, report


def cmd_run(args) -> int:
    config = parse_config(args.config)
    out_dir = Path(args.out or config.out_dir or Path("runs") / config.scenario_id)
    _, load, pv = load_scenario_data(config)
    _, report = _run_one(config, load, pv, out_dir)
    sys.stdout.write(report_text(report, title=config.scenario_id))
    sys.stdout.write(f"outputs in {out_dir}\n")
    return EXIT_OK


def cmd_compare(args) -> int:
    base = parse_config(args.config)
    try:
        cases = parse_case_spec(args.cases)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    configs = []
    for case in cases:
        config = dataclasses.replace(base, controller=case, name=None)
        validate_case(config)
        configs.append(config)
    out_root = Path(args.out or base.out_dir or "compare")
    _, load, pv = load_scenario_data(base)
    results, run_times = {}, {}
    for config in configs:
        logger.info("case %s", config.scenario_id)
        trace, report = _run_one(config, load, pv, out_root / config.scenario_id)
        results[config.scenario_id] = (trace, report)
        run_times[config.scenario_id] = float(trace.solve_time.mean())
    emit_comparison(results, run_times, out_root)
    sys.stdout.write((out_root / "comparison.txt").read_text())
    return EXIT_OK


def cmd_gen_data(args) -> int:
    try:
        grid = build_grid(args.start, args.days, args.step_minutes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    load, pv = synthetic_series(grid, seed=args.seed)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    write_timeseries(out, grid, load, pv)
    sys.stdout.write(f"wrote {grid.n_steps} rows to {out}\n")
    return EXIT_OK


def cmd_dump_lp(args) -> int:
    config = parse_config(args.config)
    grid, load, pv = load_scenario_data(config)
    if not 0 <= args.step < grid.n_steps:
        raise ConfigError(f"--step must lie in [0, {grid.n_steps - 1}]")
    data = PlantData(grid, config.tariff, config.bess, load, pv)
    controller = config.controller.build(grid, method=config.solver)
    # reach the state at the requested step by closed-loop simulation
    if args.step:
        trace = run_controller(controller, data, config.initial_peak, n_steps=args.step)
        x_t = float(trace.x[-1])
        peak = PeakState(float(trace.p_nc[-1]), float(trace.p_op[-1]))
    else:
        x_t, peak = config.bess.soc_init, config.initial_peak
    chunks = []
    for stage, model in controller.programs(args.step, x_t, peak, data):
        if args.stage not in ("all", stage):
            continue
        lp = lower(model)
        chunks.append(f"\\ {config.scenario_id} step {args.step} stage {stage}\n"
                      + lp.to_lp_format())
    text = "\n".join(chunks)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="empc-dispatch",
        description="Closed-loop economic MPC battery dispatch under demand charges.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: config output.out_dir "
                                 "or runs/<scenario>)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="simulate several cases on one dataset")
    p.add_argument("--config", required=True, help="base config; its controller is replaced")
    p.add_argument("--cases", required=True,
                   help="comma-separated case ids or matrix, shrinking, rolling, star")
    p.add_argument("--out", help="output root (default: compare)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-data", help="write a seeded synthetic series file")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--start", default="2019-01-01")
    p.add_argument("--step-minutes", type=int, default=15)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("dump-lp", help="write the LP(s) solved at one step in LP format")
    p.add_argument("--config", required=True)
    p.add_argument("--step", type=int, required=True)
    p.add_argument("--stage", choices=("all", "reference", "mpc"), default="all")
    p.add_argument("--out", help="file to write (default: stdout)")
    p.set_defaults(func=cmd_dump_lp)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=resolve_log_level(),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA
    except (SimulationError, SolverError) as exc:
        logger.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except (OutputError, OSError) as exc:
        logger.error("output error: %s", exc)
        return EXIT_OUTPUT


if __name__ == "__main__":
    sys.exit(main())
