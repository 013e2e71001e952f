"""Energy and demand-charge pricing and the monthly peak tracker."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timegrid import TimeGrid, _check_step


@dataclass(frozen=True)
class TariffSchedule:
    """Flat energy rate ($/kWh) plus non-coincident and on-peak demand rates ($/kW-month)."""

    r_ec: float
    r_nc: float
    r_op: float

    def __post_init__(self):
        for name in ("r_ec", "r_nc", "r_op"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class BessParams:
    """Battery rating. SOC values are fractions of ``energy_kwh``."""

    energy_kwh: float
    power_kw: float
    eta: float
    soc_min: float
    soc_max: float
    soc_init: float = 0.5

    def __post_init__(self):
        if not self.energy_kwh > 0:
            raise ValueError("energy_kwh must be > 0")
        if not self.power_kw > 0:
            raise ValueError("power_kw must be > 0")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if not 0 <= self.soc_min <= self.soc_init <= self.soc_max <= 1:
            raise ValueError("need 0 <= soc_min <= soc_init <= soc_max <= 1")

    def loss_rate(self, tariff: TariffSchedule, dt_hours: float) -> float:
        """$ per kW of |u2| per step."""
        return tariff.r_ec * dt_hours * (1.0 - self.eta) / 2.0


@dataclass(frozen=True)
class PeakState:
    """Highest NC and OP demand (kW) seen so far in the current billing month."""

    p_nc: float = 0.0
    p_op: float = 0.0

    def __post_init__(self):
        if self.p_nc < 0 or self.p_op < 0:
            raise ValueError("peak state must be nonnegative")


def energy_cost_step(u1, u2, tariff: TariffSchedule, bess: BessParams, dt_hours: float):
    """Grid energy cost and battery loss cost for one step.

    Exported energy (``u1 < 0``) is credited at the energy rate. Works
    elementwise on arrays as well as on scalars.
    """
    if not dt_hours > 0:
        raise ValueError("dt_hours must be > 0")
    grid_cost = tariff.r_ec * dt_hours * u1
    loss_cost = bess.loss_rate(tariff, dt_hours) * np.abs(u2)
    return grid_cost, loss_cost


def window_peaks(u1, grid: TimeGrid, t: int, tau_e: int) -> tuple[float, float]:
    """NC and OP peaks of ``u1`` over ``{t..tau_e}`` restricted to ``t``'s month.

    ``u1`` holds the values for steps ``t..tau_e``. The OP peak is 0 when no
    on-peak step of the month falls in the range.
    """
    if tau_e < t:
        raise ValueError(f"tau_e={tau_e} precedes t={t}")
    u1 = np.asarray(u1, dtype=float)
    if len(u1) != tau_e - t + 1:
        raise ValueError("u1 must cover t..tau_e")
    _check_step(grid, t)
    stop = min(tau_e, grid.month_bounds(t)[1]) + 1
    in_month = u1[: stop - t]
    p_nc = float(in_month.max())
    op_mask = grid.op[t:stop]
    p_op = float(in_month[op_mask].max()) if op_mask.any() else 0.0
    return p_nc, p_op


def demand_charge_cost(peaks, state: PeakState, tariff: TariffSchedule) -> float:
    """Demand charge for window peaks floored at the tracked thresholds."""
    p_nc, p_op = peaks
    return tariff.r_nc * max(p_nc, state.p_nc) + tariff.r_op * max(p_op, state.p_op)


def update_peak_state(state: PeakState, u1_t: float, grid: TimeGrid, t: int) -> PeakState:
    """Advance the monthly peak tracker past step ``t``.

    The tracker resets to zero when ``t + 1`` opens a new billing month.
    """
    _check_step(grid, t)
    keep = 1 - int(grid.month_start[t + 1])
    p_nc = keep * max(state.p_nc, u1_t)
    p_op = keep * max(state.p_op, u1_t if grid.op[t] else 0.0)
    return PeakState(float(p_nc), float(p_op))


def replay_peak_states(u1, grid: TimeGrid, initial: PeakState = PeakState()):
    """Fold :func:`update_peak_state` over a full ``u1`` series.

    Returns the states after every step and, per month, the tracked peaks just
    before the month-end reset.
    """
    u1 = np.asarray(u1, dtype=float)
    state = initial
    after = []
    month_peaks = []
    for t, value in enumerate(u1):
        keep_nc = max(state.p_nc, value)
        keep_op = max(state.p_op, value if grid.op[t] else 0.0)
        if t == grid.month_last[grid.month[t]]:
            month_peaks.append((float(keep_nc), float(keep_op)))
        state = update_peak_state(state, value, grid, t)
        after.append(state)
    return after, month_peaks
