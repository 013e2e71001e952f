"""Discrete calendar for the dispatch simulation.

Steps are fixed-length intervals starting at local midnight of ``start_date``.
Billing months follow the civil calendar, and the on-peak (OP) demand window
is 16:00-21:00 every day, half-open at 21:00.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

MINUTES_PER_DAY = 1440
OP_START_MINUTE = 16 * 60
OP_END_MINUTE = 21 * 60

SHRINKING = "shrinking"
ROLLING = "rolling"
MONTH = "month"
HORIZON_MODES = (SHRINKING, ROLLING, MONTH)


@dataclass(frozen=True)
class TimeGrid:
    """Fixed-step time axis with day, month and on-peak structure.

    Use :func:`build_grid` to construct one; the per-step arrays are derived
    once and never mutated.
    """

    start_date: dt.date
    n_days: int
    step_minutes: int
    day: np.ndarray = field(init=False, repr=False, compare=False)
    month: np.ndarray = field(init=False, repr=False, compare=False)
    minute_of_day: np.ndarray = field(init=False, repr=False, compare=False)
    op: np.ndarray = field(init=False, repr=False, compare=False)
    month_first: np.ndarray = field(init=False, repr=False, compare=False)
    month_last: np.ndarray = field(init=False, repr=False, compare=False)
    month_labels: tuple = field(init=False, repr=False, compare=False)
    month_start: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.step_minutes <= 0 or MINUTES_PER_DAY % self.step_minutes:
            raise ValueError(
                f"step_minutes must divide {MINUTES_PER_DAY}, got {self.step_minutes}"
            )
        if self.n_days < 1:
            raise ValueError(f"n_days must be >= 1, got {self.n_days}")

        spd = MINUTES_PER_DAY // self.step_minutes
        n = self.n_days * spd
        steps = np.arange(n)
        day = steps // spd
        minute = (steps % spd) * self.step_minutes

        dates = [self.start_date + dt.timedelta(days=int(d)) for d in range(self.n_days)]
        y0, m0 = self.start_date.year, self.start_date.month
        day_month = np.array([(d.year - y0) * 12 + d.month - m0 for d in dates])
        month = day_month[day]

        n_months = int(month[-1]) + 1
        first = np.searchsorted(month, np.arange(n_months), side="left")
        last = np.searchsorted(month, np.arange(n_months), side="right") - 1
        labels = []
        for m in range(n_months):
            d = dates[first[m] // spd]
            labels.append(f"{d.year:04d}-{d.month:02d}")

        # one extra entry for the lookahead step t = n_steps
        starts = np.zeros(n + 1, dtype=int)
        starts[first] = 1
        starts[n] = int((dates[-1] + dt.timedelta(days=1)).day == 1)

        for name, value in (
            ("day", day),
            ("month", month),
            ("minute_of_day", minute),
            ("op", (minute >= OP_START_MINUTE) & (minute < OP_END_MINUTE)),
            ("month_first", first),
            ("month_last", last),
            ("month_labels", tuple(labels)),
            ("month_start", starts),
        ):
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def steps_per_day(self) -> int:
        return MINUTES_PER_DAY // self.step_minutes

    @property
    def n_steps(self) -> int:
        return self.n_days * self.steps_per_day

    @property
    def n_months(self) -> int:
        return len(self.month_first)

    @property
    def dt_hours(self) -> float:
        """Step length in hours."""
        return self.step_minutes / 60.0

    def date_of_day(self, day: int) -> dt.date:
        return self.start_date + dt.timedelta(days=int(day))

    def timestamp(self, t: int) -> dt.datetime:
        """Local clock time at the start of step ``t`` (``t == n_steps`` allowed)."""
        _check_step(self, t, allow_end=True)
        start = dt.datetime.combine(self.start_date, dt.time())
        return start + dt.timedelta(minutes=int(t) * self.step_minutes)

    def month_bounds(self, t: int) -> tuple[int, int]:
        """First and last step of the billing month containing ``t``, clipped to the grid."""
        m = self.month[t]
        return int(self.month_first[m]), int(self.month_last[m])

    def month_is_complete(self, m: int) -> bool:
        """Whether month ``m`` is covered from its first to its last calendar day."""
        spd = self.steps_per_day
        first_date = self.date_of_day(self.month_first[m] // spd)
        last_date = self.date_of_day(self.month_last[m] // spd)
        return first_date.day == 1 and (last_date + dt.timedelta(days=1)).day == 1


@dataclass(frozen=True)
class HorizonSpec:
    """How an optimization window is laid out relative to the current step.

    ``nominal_length_steps`` is ignored for ``mode="month"``, where the window
    runs to the end of the current billing month.
    """

    mode: str
    nominal_length_steps: int = 0

    def __post_init__(self):
        if self.mode not in HORIZON_MODES:
            raise ValueError(f"unknown horizon mode {self.mode!r}")
        if self.mode != MONTH and self.nominal_length_steps <= 0:
            raise ValueError("nominal_length_steps must be positive")

    @classmethod
    def from_hours(cls, mode: str, hours: float, grid: TimeGrid) -> "HorizonSpec":
        steps = hours * 60 / grid.step_minutes
        if mode != MONTH:
            if abs(steps - round(steps)) > 1e-9:
                raise ValueError(f"{hours} h is not a whole number of steps")
            steps = int(round(steps))
            if steps % grid.steps_per_day:
                raise ValueError(f"horizon of {hours} h is not a whole number of days")
        return cls(mode, int(steps) if mode != MONTH else 0)

    def validate(self, grid: TimeGrid) -> None:
        if self.mode != MONTH and self.nominal_length_steps % grid.steps_per_day:
            raise ValueError(
                f"horizon of {self.nominal_length_steps} steps is not a whole "
                f"number of days ({grid.steps_per_day} steps/day)"
            )


@dataclass(frozen=True)
class HorizonWindow:
    """Inclusive step range ``[start, end]`` and the 50% SOC threshold step.

    ``threshold_step`` is ``None`` when no midnight falls inside a rolling
    window. It may equal ``end + 1``, one step past the window.
    """

    start: int
    end: int
    threshold_step: Optional[int]

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"empty window [{self.start}, {self.end}]")

    def __len__(self) -> int:
        return self.end - self.start + 1

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.start, self.end + 1)

    def __contains__(self, k) -> bool:
        return self.start <= k <= self.end


def build_grid(start_date, n_days: int, step_minutes: int = 15) -> TimeGrid:
    """Build a :class:`TimeGrid` of ``n_days`` whole days from ``start_date``."""
    if isinstance(start_date, str):
        start_date = dt.date.fromisoformat(start_date)
    elif isinstance(start_date, dt.datetime):
        start_date = start_date.date()
    return TimeGrid(start_date, int(n_days), int(step_minutes))


def _check_step(grid: TimeGrid, t, allow_end: bool = False) -> None:
    limit = grid.n_steps + (1 if allow_end else 0)
    if not 0 <= t < limit:
        raise IndexError(f"step {t} outside [0, {limit})")


def is_op_period(grid: TimeGrid, t: int) -> bool:
    """True iff step ``t`` starts inside the 16:00-21:00 on-peak window."""
    _check_step(grid, t)
    return bool(grid.op[t])


def sigma(grid: TimeGrid, t: int) -> tuple[int, int]:
    """Month-reset flags ``(sigma_nc, sigma_op)`` for step ``t``.

    ``t == n_steps`` is accepted for one-step lookahead; it counts as a month
    start only when the day after the grid is the 1st of a month.
    """
    _check_step(grid, t, allow_end=True)
    flag = int(grid.month_start[t])
    return flag, flag


def month_start_flags(grid: TimeGrid, start: int, stop: int) -> np.ndarray:
    """Vector of sigma flags for steps ``start .. stop - 1`` (``stop <= n_steps + 1``)."""
    if not 0 <= start <= stop <= grid.n_steps + 1:
        raise IndexError(f"range [{start}, {stop}) outside the grid")
    return grid.month_start[start:stop]


def is_midnight(grid: TimeGrid, t: int) -> bool:
    return t % grid.steps_per_day == 0


def _window(grid: TimeGrid, spec: HorizonSpec, t: int) -> HorizonWindow:
    _check_step(grid, t)
    spd = grid.steps_per_day
    last = grid.n_steps - 1
    if spec.mode == MONTH:
        end = grid.month_bounds(t)[1]
        return HorizonWindow(t, end, end + 1)
    if spec.mode == SHRINKING:
        n_days = spec.nominal_length_steps // spd
        end = min((t // spd + n_days) * spd - 1, last)
        return HorizonWindow(t, end, end + 1)
    end = min(t + spec.nominal_length_steps - 1, last)
    # last midnight in (start, end + 1]
    threshold = ((end + 1) // spd) * spd
    return HorizonWindow(t, end, threshold if threshold > t else None)


def mpc_window(grid: TimeGrid, spec: HorizonSpec, t: int) -> HorizonWindow:
    """Prediction window starting at ``t`` for a shrinking, rolling or month horizon."""
    return _window(grid, spec, t)


def ref_window(grid: TimeGrid, spec: HorizonSpec, t: int) -> HorizonWindow:
    """Reference-trajectory window; same placement rules as :func:`mpc_window`."""
    return _window(grid, spec, t)
