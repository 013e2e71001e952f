"""Series files, scenario configuration and report emission.

Series files are CSV with the header ``timestamp,load_kw,pv_kw`` and one row
per step; timestamps are ISO-8601 local clock times. Configuration files are
YAML with the sections ``tariff``, ``bess``, ``controller``, ``data``,
``sim`` and an optional ``output`` (see the README for the full key list).
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .controllers import EMPC_STAR, TRAD, VARIANTS
from .sim import (ControllerConfig, CostReport, ScenarioConfig, SimulationTrace,
                  settle_costs)
from .synthetic import synthetic_series
from .tariff import BessParams, PeakState, TariffSchedule
from .timegrid import TimeGrid

logger = logging.getLogger(__name__)

SERIES_HEADER = ("timestamp", "load_kw", "pv_kw")
TRACE_HEADER = ("t", "timestamp", "u1_kw", "u2_kw", "x", "x_next", "p_nc_kw", "p_op_kw",
                "solve_time_s", "month_crossing", "terminal_gap", "clamped", "threshold_relaxed")


class ConfigError(ValueError):
    """Missing key, bad value or unsupported case combination in a config."""


class DataError(ValueError):
    """Base class for series-file problems."""


class MalformedRowError(DataError):
    """A row that cannot be parsed or holds invalid values."""


class GapError(DataError):
    """One or more rows missing from an otherwise regular series."""

    def __init__(self, missing: datetime, row: int):
        self.missing = missing
        self.row = row
        super().__init__(f"gap in series: no row for {missing.isoformat()} (before line {row})")


class SpacingError(DataError):
    """Row spacing differs from the configured step."""


class LengthMismatchError(DataError):
    """The series does not cover the simulation grid exactly."""


class OutputError(RuntimeError):
    """Nothing to emit, or the output directory is unusable."""


# ---------------------------------------------------------------- series


@dataclass(frozen=True)
class SeriesData:
    timestamps: tuple
    load_kw: np.ndarray
    pv_kw: np.ndarray

    def __len__(self) -> int:
        return len(self.timestamps)


def _parse_value(text: str, name: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedRowError(f"line {line}: {name} {text!r} is not a number") from None
    if not math.isfinite(value):
        raise MalformedRowError(f"line {line}: {name} is not finite")
    if value < 0:
        raise MalformedRowError(f"line {line}: negative {name} {value}")
    return value


def load_timeseries(path, grid: Optional[TimeGrid] = None) -> SeriesData:
    """Read and validate a series file, optionally against ``grid``.

    Raises
    ------
    MalformedRowError
        Bad header, unparsable row, NaN, negative load or PV, or
        timestamps that do not increase.
    SpacingError
        Rows are regular but not ``grid.step_minutes`` apart.
    GapError
        Rows are missing; the first missing timestamp is named.
    LengthMismatchError
        The series does not start at the grid start or has the wrong length.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SERIES_HEADER:
            raise MalformedRowError(f"{path}: header must be {','.join(SERIES_HEADER)}")
        stamps, load, pv = [], [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise MalformedRowError(f"line {line}: expected 3 fields, got {len(row)}")
            try:
                ts = datetime.fromisoformat(row[0].strip())
            except ValueError:
                raise MalformedRowError(f"line {line}: bad timestamp {row[0]!r}") from None
            if ts.tzinfo is not None:
                raise MalformedRowError(f"line {line}: timestamps must be local clock time")
            stamps.append(ts)
            load.append(_parse_value(row[1], "load_kw", line))
            pv.append(_parse_value(row[2], "pv_kw", line))
    if not stamps:
        raise MalformedRowError(f"{path}: no data rows")

    deltas = [b - a for a, b in zip(stamps, stamps[1:])]
    for i, d in enumerate(deltas):
        if d <= timedelta(0):
            raise MalformedRowError(f"line {i + 3}: timestamps must increase strictly")
    if grid is not None:
        step = timedelta(minutes=grid.step_minutes)
    elif deltas:
        step = Counter(deltas).most_common(1)[0][0]
    else:
        step = None
    if deltas:
        common = Counter(deltas).most_common(1)[0][0]
        if common != step:
            raise SpacingError(
                f"rows are {common.total_seconds() / 60:g} min apart, expected "
                f"{step.total_seconds() / 60:g} min"
            )
        for i, d in enumerate(deltas):
            if d != step:
                if d % step == timedelta(0):
                    raise GapError(stamps[i] + step, i + 3)
                raise SpacingError(
                    f"line {i + 3}: spacing {d.total_seconds() / 60:g} min is not a "
                    f"multiple of the {step.total_seconds() / 60:g} min step"
                )

    if grid is not None:
        start = datetime.combine(grid.start_date, datetime.min.time())
        if stamps[0] != start:
            raise LengthMismatchError(
                f"series starts at {stamps[0].isoformat()}, grid at {start.isoformat()}"
            )
        if len(stamps) != grid.n_steps:
            raise LengthMismatchError(
                f"series has {len(stamps)} rows, grid needs {grid.n_steps}"
            )
    return SeriesData(tuple(stamps), np.array(load), np.array(pv))


def write_timeseries(path, grid: TimeGrid, load_kw, pv_kw) -> None:
    """Write a series file on ``grid``; values keep full precision."""
    load_kw = np.asarray(load_kw, float)
    pv_kw = np.asarray(pv_kw, float)
    if len(load_kw) != grid.n_steps or len(pv_kw) != grid.n_steps:
        raise ValueError("series length does not match the grid")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for t in range(grid.n_steps):
            w.writerow((grid.timestamp(t).isoformat(), repr(float(load_kw[t])),
                        repr(float(pv_kw[t]))))


# ---------------------------------------------------------------- config

_SECTIONS = {
    "name": None,
    "tariff": {"r_ec", "r_nc", "r_op"},
    "bess": {"energy_kwh", "power_kw", "eta", "soc_min", "soc_max", "soc_init"},
    "controller": {"variant", "tracking", "mode", "t_mpc_hours", "t_r_hours"},
    "data": {"series_path", "synthetic_seed"},
    "sim": {"start_date", "n_days", "step_minutes", "initial_peak", "solver"},
    "output": {"out_dir"},
}
_REQUIRED = {
    "tariff": ("r_ec", "r_nc", "r_op"),
    "bess": ("energy_kwh", "power_kw", "eta", "soc_min", "soc_max"),
    "controller": ("variant", "tracking", "mode", "t_mpc_hours"),
    "sim": ("start_date", "n_days"),
}


def _section(tree: dict, name: str) -> dict:
    sec = tree.get(name)
    if sec is None:
        if name in _REQUIRED or name == "data":
            raise ConfigError(f"missing section {name!r}")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    unknown = set(sec) - _SECTIONS[name]
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {', '.join(sorted(unknown))}")
    for key in _REQUIRED.get(name, ()):
        if key not in sec:
            raise ConfigError(f"missing key {name}.{key}")
    return sec


def _number(sec: dict, name: str, key: str, default=None) -> float:
    value = sec.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}.{key} must be a number, got {value!r}")
    return float(value)


def config_from_dict(tree: dict, base_dir=".") -> ScenarioConfig:
    """Validate a config tree; relative paths resolve against ``base_dir``."""
    if not isinstance(tree, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(tree) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    tar, bes, ctl = _section(tree, "tariff"), _section(tree, "bess"), _section(tree, "controller")
    dat, sim, out = _section(tree, "data"), _section(tree, "sim"), _section(tree, "output")
    try:
        tariff = TariffSchedule(*(_number(tar, "tariff", k) for k in ("r_ec", "r_nc", "r_op")))
        bess = BessParams(
            *(_number(bes, "bess", k) for k in ("energy_kwh", "power_kw", "eta", "soc_min",
                                                 "soc_max")),
            soc_init=_number(bes, "bess", "soc_init", 0.5),
        )
    except ValueError as exc:
        raise ConfigError(f"out-of-range value: {exc}") from None

    variant = ctl["variant"]
    if variant not in VARIANTS:
        raise ConfigError(f"controller.variant must be one of {', '.join(VARIANTS)}")
    t_r = ctl.get("t_r_hours")
    if variant == EMPC_STAR and t_r == "month":
        t_r = None
    if t_r is not None:
        if variant != "proposed":
            raise ConfigError(f"controller.t_r_hours must be empty for {variant}")
        t_r = _number(ctl, "controller", "t_r_hours")
    elif variant == "proposed":
        raise ConfigError("missing key controller.t_r_hours (required for proposed)")
    controller = ControllerConfig(variant, ctl["tracking"], ctl["mode"],
                                  _number(ctl, "controller", "t_mpc_hours"), t_r)

    if ("series_path" in dat) == ("synthetic_seed" in dat):
        raise ConfigError("data needs exactly one of series_path, synthetic_seed")
    series_path = None
    if "series_path" in dat:
        series_path = str((Path(base_dir) / str(dat["series_path"])).resolve())
    seed = dat.get("synthetic_seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigError("data.synthetic_seed must be a nonnegative integer")

    start = sim["start_date"]
    if isinstance(start, str):
        try:
            start = date.fromisoformat(start)
        except ValueError:
            raise ConfigError(f"sim.start_date {start!r} is not YYYY-MM-DD") from None
    if not isinstance(start, date) or isinstance(start, datetime):
        raise ConfigError("sim.start_date must be a date")
    n_days = sim["n_days"]
    step = sim.get("step_minutes", 15)
    for key, value in (("n_days", n_days), ("step_minutes", step)):
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ConfigError(f"sim.{key} must be a positive integer")
    if 1440 % step:
        raise ConfigError("sim.step_minutes must divide 1440")
    peak = sim.get("initial_peak") or {}
    if not isinstance(peak, dict) or set(peak) - {"p_nc", "p_op"}:
        raise ConfigError("sim.initial_peak takes p_nc and p_op")
    try:
        initial_peak = PeakState(_number(peak, "sim.initial_peak", "p_nc", 0.0),
                                 _number(peak, "sim.initial_peak", "p_op", 0.0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    solver = sim.get("solver", "highs")
    if solver not in ("highs", "simplex"):
        raise ConfigError("sim.solver must be highs or simplex")

    out_dir = out.get("out_dir")
    if out_dir is not None:
        out_dir = str((Path(base_dir) / str(out_dir)).resolve())
    name = tree.get("name")
    config = ScenarioConfig(
        controller=controller, tariff=tariff, bess=bess, start_date=start.isoformat(),
        n_days=n_days, step_minutes=step, series_path=series_path, out_dir=out_dir,
        initial_peak=initial_peak, solver=solver, name=None if name is None else str(name),
        synthetic_seed=seed,
    )
    validate_case(config)
    return config


def validate_case(config: ScenarioConfig) -> None:
    """Reject controller settings the algorithm cannot run on the config's grid."""
    try:
        grid = config.grid()
        config.controller.build(grid, method=config.solver)
    except ValueError as exc:
        raise ConfigError(f"invalid case {config.controller.label}: {exc}") from None


def parse_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        tree = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return config_from_dict(tree, base_dir=path.parent)


def config_to_dict(config: ScenarioConfig) -> dict:
    """Config tree that :func:`config_from_dict` maps back to ``config``."""
    c = config.controller
    tree = {
        "tariff": {"r_ec": config.tariff.r_ec, "r_nc": config.tariff.r_nc,
                   "r_op": config.tariff.r_op},
        "bess": {"energy_kwh": config.bess.energy_kwh, "power_kw": config.bess.power_kw,
                 "eta": config.bess.eta, "soc_min": config.bess.soc_min,
                 "soc_max": config.bess.soc_max, "soc_init": config.bess.soc_init},
        "controller": {"variant": c.variant, "tracking": c.tracking, "mode": c.mode,
                       "t_mpc_hours": c.t_mpc_hours, "t_r_hours": c.t_r_hours},
        "data": ({"series_path": config.series_path} if config.series_path is not None
                 else {"synthetic_seed": config.synthetic_seed}),
        "sim": {"start_date": config.start_date, "n_days": config.n_days,
                "step_minutes": config.step_minutes,
                "initial_peak": {"p_nc": config.initial_peak.p_nc,
                                 "p_op": config.initial_peak.p_op},
                "solver": config.solver},
    }
    if config.name is not None:
        tree["name"] = config.name
    if config.out_dir is not None:
        tree["output"] = {"out_dir": config.out_dir}
    return tree


def load_scenario_data(config: ScenarioConfig):
    """``(grid, load_kw, pv_kw)`` for a scenario."""
    grid = config.grid()
    if config.series_path is not None:
        try:
            series = load_timeseries(config.series_path, grid)
        except OSError as exc:
            raise DataError(f"cannot read series file: {exc}") from None
        return grid, series.load_kw, series.pv_kw
    load, pv = synthetic_series(grid, seed=config.synthetic_seed)
    return grid, load, pv


# ---------------------------------------------------------------- outputs


def _fmt(value) -> str:
    """Shortest round-trip text for a float (exact on re-read)."""
    return repr(float(value))


def report_text(report: CostReport, title: str = "") -> str:
    """Aligned human-readable table of the cost report."""
    cols = ("month", "NCDC", "OPDC", "energy", "BESS loss", "total", "peak NC", "peak OP")
    rows = []
    for m in report.months:
        label = m.label + (" *" if m.partial else "")
        rows.append((label, m.ncdc, m.opdc, m.energy_cost, m.bess_loss, m.total, m.peak_nc,
                     m.peak_op))
    rows.append(("annual", report.ncdc, report.opdc, report.energy_cost, report.bess_loss,
                 report.annual_cost, None, None))
    text = [[r[0]] + ["" if v is None else f"{v:,.2f}" for v in r[1:]] for r in rows]
    widths = [max(len(cols[i]), *(len(r[i]) for r in text)) for i in range(len(cols))]
    lines = []
    if title:
        lines.append(title)
    lines.append("  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i])
                           for i, c in enumerate(cols)))
    lines.append("  ".join("-" * w for w in widths))
    for r in text:
        lines.append("  ".join(v.ljust(widths[0]) if i == 0 else v.rjust(widths[i])
                               for i, v in enumerate(r)))
    lines.append("costs in $, peaks in kW")
    if report.has_partial_month:
        lines.append("* partial month, billed on the steps simulated")
    return "\n".join(lines) + "\n"


def build_manifest(config: ScenarioConfig, trace: SimulationTrace, wall_time: float,
                   files=()) -> dict:
    return {
        "scenario": config.scenario_id,
        "code_version": __version__,
        "config": config_to_dict(config),
        "n_steps": len(trace),
        "wall_time_s": wall_time,
        "solve_time_total_s": float(np.sum(trace.solve_time)),
        "solve_time_mean_s": float(np.mean(trace.solve_time)) if len(trace) else 0.0,
        "solve_time_max_s": float(np.max(trace.solve_time)) if len(trace) else 0.0,
        "clamped_steps": int(np.sum(trace.clamped)),
        "month_crossing_steps": int(np.sum(trace.month_crossing)),
        "threshold_relaxed_steps": int(np.sum(trace.threshold_relaxed)),
        "files": sorted(files),
    }


def write_trace(path, trace: SimulationTrace) -> None:
    grid = trace.grid
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for t in range(len(trace)):
            w.writerow((
                t, grid.timestamp(t).isoformat(), _fmt(trace.u1[t]), _fmt(trace.u2[t]),
                _fmt(trace.x[t]), _fmt(trace.x[t + 1]), _fmt(trace.p_nc[t]),
                _fmt(trace.p_op[t]), _fmt(trace.solve_time[t]), int(trace.month_crossing[t]),
                _fmt(trace.terminal_gap[t]), int(trace.clamped[t]),
                int(trace.threshold_relaxed[t]),
            ))


def read_trace(path) -> dict:
    """Columns of an emitted trace file as float arrays (timestamps as strings)."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    cols = {}
    for key in TRACE_HEADER:
        if key == "timestamp":
            cols[key] = [r[key] for r in rows]
        else:
            cols[key] = np.array([float(r[key]) for r in rows])
    return cols


def settle_from_trace_file(path, config: ScenarioConfig) -> CostReport:
    """Recompute the cost report from an emitted trace file alone."""
    cols = read_trace(path)
    grid = config.grid()
    return settle_costs(cols["u1_kw"], cols["u2_kw"], grid, config.tariff, config.bess,
                        config.initial_peak)


def emit_outputs(trace: SimulationTrace, report: CostReport, manifest: dict, out_dir) -> list:
    """Write ``trace.csv``, ``report.json``, ``report.txt`` and ``manifest.json``.

    ``report.json`` holds only settled costs (no timings), so reruns of the
    same config produce byte-identical report files. Returns the written paths.
    """
    if len(trace) == 0 or not report.months:
        raise OutputError("empty trace: nothing to report")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out}: {exc}") from None
    names = ["trace.csv", "report.json", "report.txt", "manifest.json"]
    write_trace(out / "trace.csv", trace)
    body = {"scenario": manifest.get("scenario"), **report.to_dict()}
    (out / "report.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    (out / "report.txt").write_text(report_text(report, title=str(manifest.get("scenario", ""))))
    manifest = dict(manifest, files=sorted(names))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info("wrote %s", ", ".join(names))
    return [out / n for n in names]


def comparison_table(results: dict) -> dict:
    """Table-shaped summary over cases: ``{case_id: {row: value}}``."""
    table = {}
    for case_id, (trace, report) in results.items():
        table[case_id] = {
            "ncdc": report.ncdc,
            "opdc": report.opdc,
            "energy_cost": report.energy_cost,
            "bess_loss": report.bess_loss,
            "annual_cost": report.annual_cost,
            "soc_drift": float(trace.x[-1] - trace.x[0]),
        }
    return table


def comparison_text(table: dict, run_times: Optional[dict] = None) -> str:
    """One row per case with the annual cost components in k$."""
    cols = (("NCDC", "ncdc"), ("OPDC", "opdc"), ("energy", "energy_cost"),
            ("BESS loss", "bess_loss"), ("annual", "annual_cost"))
    cases = list(table)
    head = ["case (k$)", *(c[0] for c in cols)]
    if run_times:
        head.append("s/step")
    body = []
    for case in cases:
        row = [case, *(f"{table[case][key] * 1e-3:.3f}" for _, key in cols)]
        if run_times:
            row.append(f"{run_times[case]:.4f}")
        body.append(row)
    widths = [max(len(r[i]) for r in [head, *body]) for i in range(len(head))]
    lines = ["  ".join(v.ljust(widths[i]) if i == 0 else v.rjust(widths[i])
                       for i, v in enumerate(r)) for r in [head, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    best = min(cases, key=lambda c: table[c]["annual_cost"])
    lines.append(f"lowest annual cost: {best}")
    return "\n".join(lines) + "\n"


def emit_comparison(results: dict, run_times: dict, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = comparison_table(results)
    (out / "comparison.json").write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    (out / "comparison.txt").write_text(comparison_text(table, run_times))
    return [out / "comparison.json", out / "comparison.txt"]


def resolve_log_level(env=None) -> int:
    """Log level from ``EMPC_LOG_LEVEL`` (name or number), default WARNING."""
    env = os.environ if env is None else env
    raw = env.get("EMPC_LOG_LEVEL", "WARNING").strip()
    if raw.isdigit():
        return int(raw)
    level = logging.getLevelName(raw.upper())
    return level if isinstance(level, int) else logging.WARNING
