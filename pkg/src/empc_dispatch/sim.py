"""Closed-loop simulation and monthly cost settlement."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .controllers import (EMPC_STAR, PROPOSED, TRAD, Controller, PlantData,
                          make_controller)
from .optimizer import SolverError
from .tariff import (BessParams, PeakState, TariffSchedule, energy_cost_step,
                     replay_peak_states, update_peak_state)
from .timegrid import MONTH, HorizonSpec, TimeGrid, build_grid

logger = logging.getLogger(__name__)

SOC_TOL = 1e-6


class PlantError(RuntimeError):
    """The battery was driven outside its SOC limits beyond tolerance."""


class SimulationError(RuntimeError):
    """A controller failed during the closed loop."""

    def __init__(self, step: int, cause: Exception):
        self.step = step
        self.cause = cause
        super().__init__(f"step {step}: {cause}")


def plant_step(x: float, u2: float, bess: BessParams, dt_hours: float,
               tol: float = SOC_TOL) -> tuple[float, bool]:
    """Propagate the SOC by one step.

    Returns ``(x_next, clamped)``. Results within ``tol`` outside the SOC
    limits are clamped onto them and flagged; anything further out, or a
    power beyond the rating, raises :class:`PlantError`.
    """
    if abs(u2) > bess.power_kw * (1 + tol) + tol:
        raise PlantError(f"|u2|={abs(u2)} exceeds the power rating {bess.power_kw}")
    x_next = x - u2 * dt_hours / bess.energy_kwh
    if x_next < bess.soc_min - tol or x_next > bess.soc_max + tol:
        raise PlantError(
            f"SOC {x_next:.9f} outside [{bess.soc_min}, {bess.soc_max}] beyond tolerance"
        )
    clamped = min(max(x_next, bess.soc_min), bess.soc_max)
    return clamped, clamped != x_next


@dataclass(frozen=True)
class ControllerConfig:
    """Which controller to run and its horizons (hours)."""

    variant: str = PROPOSED
    tracking: str = "WT"
    mode: str = "rolling"
    t_mpc_hours: float = 48.0
    t_r_hours: Optional[float] = 48.0

    def build(self, grid: TimeGrid, method: str = "highs") -> Controller:
        if self.variant == EMPC_STAR:
            mpc = HorizonSpec.from_hours(self.mode, self.t_mpc_hours, grid)
            return make_controller(EMPC_STAR, self.tracking, mpc, HorizonSpec(MONTH),
                                   method=method)
        mpc = HorizonSpec.from_hours(self.mode, self.t_mpc_hours, grid)
        ref = None
        if self.variant != TRAD:
            ref = HorizonSpec.from_hours(self.mode, self.t_r_hours, grid)
        return make_controller(self.variant, self.tracking, mpc, ref, method=method)

    @property
    def label(self) -> str:
        if self.variant == TRAD:
            return f"trad_{self.tracking}_{self.mode}_{self.t_mpc_hours:g}"
        if self.variant == EMPC_STAR:
            return f"empc_star_{self.tracking}_{self.mode}_{self.t_mpc_hours:g}"
        return f"proposed_{self.tracking}_{self.mode}_{self.t_mpc_hours:g}_{self.t_r_hours:g}"


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one closed-loop run."""

    controller: ControllerConfig
    tariff: TariffSchedule
    bess: BessParams
    start_date: str = "2019-01-01"
    n_days: int = 365
    step_minutes: int = 15
    series_path: Optional[str] = None
    out_dir: Optional[str] = None
    initial_peak: PeakState = PeakState()
    solver: str = "highs"
    name: Optional[str] = None
    synthetic_seed: Optional[int] = 0

    def grid(self) -> TimeGrid:
        return build_grid(self.start_date, self.n_days, self.step_minutes)

    @property
    def scenario_id(self) -> str:
        return self.name or self.controller.label

    def to_dict(self) -> dict:
        return asdict(self)


class StepRecord(NamedTuple):
    t: int
    u1: float
    u2: float
    x_next: float
    peak_state_after: PeakState
    solve_time: float
    month_crossing: bool
    terminal_gap: float
    clamped: bool
    threshold_relaxed: bool


@dataclass
class SimulationTrace:
    """Column store of per-step closed-loop records.

    ``x`` has ``n_steps + 1`` entries (the SOC before every step plus the
    final one); the other columns have one entry per executed step.
    """

    grid: TimeGrid
    u1: np.ndarray
    u2: np.ndarray
    x: np.ndarray
    p_nc: np.ndarray
    p_op: np.ndarray
    solve_time: np.ndarray
    month_crossing: np.ndarray
    terminal_gap: np.ndarray
    clamped: np.ndarray
    threshold_relaxed: np.ndarray

    def __len__(self) -> int:
        return len(self.u1)

    def records(self) -> Iterator[StepRecord]:
        for t in range(len(self)):
            yield StepRecord(
                t, float(self.u1[t]), float(self.u2[t]), float(self.x[t + 1]),
                PeakState(float(self.p_nc[t]), float(self.p_op[t])),
                float(self.solve_time[t]), bool(self.month_crossing[t]),
                float(self.terminal_gap[t]), bool(self.clamped[t]),
                bool(self.threshold_relaxed[t]),
            )

    def daily_soc_difference(self) -> np.ndarray:
        """SOC at 24:00 minus SOC at 00:00 for every complete simulated day."""
        spd = self.grid.steps_per_day
        n_days = len(self) // spd
        mid = self.x[: n_days * spd + 1 : spd]
        return np.diff(mid)


@dataclass
class MonthCost:
    label: str
    ncdc: float
    opdc: float
    energy_cost: float
    bess_loss: float
    peak_nc: float
    peak_op: float
    n_steps: int
    partial: bool

    @property
    def total(self) -> float:
        return self.ncdc + self.opdc + self.energy_cost + self.bess_loss


@dataclass
class CostReport:
    """Per-month and annual cost components ($)."""

    months: list = field(default_factory=list)

    def _sum(self, name: str) -> float:
        total = 0.0
        for m in self.months:
            total += getattr(m, name)
        return total

    @property
    def ncdc(self) -> float:
        return self._sum("ncdc")

    @property
    def opdc(self) -> float:
        return self._sum("opdc")

    @property
    def energy_cost(self) -> float:
        return self._sum("energy_cost")

    @property
    def bess_loss(self) -> float:
        return self._sum("bess_loss")

    @property
    def annual_cost(self) -> float:
        return self.ncdc + self.opdc + self.energy_cost + self.bess_loss

    @property
    def has_partial_month(self) -> bool:
        return any(m.partial for m in self.months)

    def to_dict(self) -> dict:
        return {
            "months": [dict(asdict(m), total=m.total) for m in self.months],
            "annual": {
                "ncdc": self.ncdc,
                "opdc": self.opdc,
                "energy_cost": self.energy_cost,
                "bess_loss": self.bess_loss,
                "annual_cost": self.annual_cost,
            },
            "partial_months": [m.label for m in self.months if m.partial],
        }


def settle_costs(u1, u2, grid: TimeGrid, tariff: TariffSchedule, bess: BessParams,
                 initial_peak: PeakState = PeakState()) -> CostReport:
    """Bill a realized ``u1``/``u2`` series month by month.

    Demand charges use the tracked peaks just before each month-end reset, so
    they include ``initial_peak`` in the first month. A trailing month that
    the series covers only partly is billed on the steps available and
    flagged ``partial``.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    n = len(u1)
    if n == 0:
        raise ValueError("nothing to settle: empty trace")
    if n > grid.n_steps or len(u2) != n:
        raise ValueError("series do not fit the grid")
    grid_cost, loss_cost = energy_cost_step(u1, u2, tariff, bess, grid.dt_hours)
    _, month_peaks = replay_peak_states(u1, grid, initial_peak)
    report = CostReport()
    for m in range(int(grid.month[n - 1]) + 1):
        first = int(grid.month_first[m])
        last = min(int(grid.month_last[m]), n - 1)
        if m < len(month_peaks):
            p_nc, p_op = month_peaks[m]
        else:
            # series stops mid-month: peaks tracked so far
            state = initial_peak if m == 0 else PeakState()
            p_nc = max(state.p_nc, float(u1[first:last + 1].max()))
            op = grid.op[first:last + 1]
            p_op = max(state.p_op, float(u1[first:last + 1][op].max()) if op.any() else 0.0)
        sl = slice(first, last + 1)
        report.months.append(MonthCost(
            label=grid.month_labels[m],
            ncdc=tariff.r_nc * p_nc,
            opdc=tariff.r_op * p_op,
            energy_cost=float(np.sum(grid_cost[sl])),
            bess_loss=float(np.sum(loss_cost[sl])),
            peak_nc=p_nc,
            peak_op=p_op,
            n_steps=last - first + 1,
            partial=bool(not grid.month_is_complete(m) or last < grid.month_last[m]),
        ))
    return report


def settle_trace(trace: SimulationTrace, tariff: TariffSchedule, bess: BessParams,
                 initial_peak: PeakState = PeakState()) -> CostReport:
    return settle_costs(trace.u1, trace.u2, trace.grid, tariff, bess, initial_peak)


def run_controller(controller: Controller, data: PlantData,
                   initial_peak: PeakState = PeakState(), n_steps: Optional[int] = None,
                   progress_every: int = 0) -> SimulationTrace:
    """Run ``controller`` in closed loop over the first ``n_steps`` of the grid."""
    grid, bess = data.grid, data.bess
    n = grid.n_steps if n_steps is None else int(n_steps)
    net = data.net_kw
    dt_hours = grid.dt_hours
    u1 = np.empty(n)
    u2 = np.empty(n)
    x = np.empty(n + 1)
    p_nc = np.empty(n)
    p_op = np.empty(n)
    solve_time = np.empty(n)
    crossing = np.zeros(n, dtype=bool)
    gap = np.full(n, np.nan)
    clamped = np.zeros(n, dtype=bool)
    relaxed = np.zeros(n, dtype=bool)

    x[0] = bess.soc_init
    peak = initial_peak
    started = time.perf_counter()
    for t in range(n):
        try:
            decision = controller(t, float(x[t]), peak, data)
            x_next, was_clamped = plant_step(x[t], decision.u2, bess, dt_hours)
        except (SolverError, PlantError, ValueError) as exc:
            logger.error("closed loop aborted at step %d: %s", t, exc)
            raise SimulationError(t, exc) from exc
        # recover the power that produced the (possibly clamped) SOC so the
        # energy balance stays exact
        u2[t] = (x[t] - x_next) * bess.energy_kwh / dt_hours if was_clamped else decision.u2
        u1[t] = net[t] - u2[t]
        x[t + 1] = x_next
        peak = update_peak_state(peak, u1[t], grid, t)
        p_nc[t], p_op[t] = peak.p_nc, peak.p_op
        solve_time[t] = decision.solve_time
        crossing[t] = decision.month_crossing
        gap[t] = decision.terminal_gap
        clamped[t] = was_clamped
        relaxed[t] = decision.threshold_relaxed
        if progress_every and (t + 1) % progress_every == 0:
            logger.info("step %d/%d, %.1f s elapsed", t + 1, n, time.perf_counter() - started)
    return SimulationTrace(grid, u1, u2, x, p_nc, p_op, solve_time, crossing, gap, clamped,
                           relaxed)


def run_closed_loop(config: ScenarioConfig, load_kw, pv_kw, progress_every: int = 0):
    """Simulate one scenario; returns ``(trace, report)``.

    Forecasts are perfect: every window is a slice of the given series.
    """
    grid = config.grid()
    data = PlantData(grid, config.tariff, config.bess,
                     np.asarray(load_kw, float), np.asarray(pv_kw, float))
    controller = config.controller.build(grid, method=config.solver)
    logger.info("running %s over %d steps", config.scenario_id, grid.n_steps)
    trace = run_controller(controller, data, config.initial_peak,
                           progress_every=progress_every)
    report = settle_trace(trace, config.tariff, config.bess, config.initial_peak)
    return trace, report
