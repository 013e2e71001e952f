"""Optimal-control problems for battery dispatch under demand charges.

Three programs share one storage model (SOC update, load balance, power and
SOC limits):

* the traditional economic MPC, with or without the tracked monthly peaks in
  its demand-charge term (``NT`` / ``WT``), plus a 50% SOC floor at the
  threshold step;
* the reference problem, which is the same program solved over the reference
  window from the same state;
* the reference-tracking MPC stage, which carries peak-tracker states
  ``y_nc``/``y_op``, bills them at month starts inside the window, and closes
  the window with a terminal cost and a terminal SOC pin taken from the
  reference trajectory.

Sign convention: ``u2 > 0`` discharges the battery, ``u1`` is grid import.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .optimizer import EQ, LE, PwlModel, solve_model
from .tariff import BessParams, PeakState, TariffSchedule
from .timegrid import MONTH, HorizonSpec, HorizonWindow, TimeGrid, mpc_window

NT = "NT"
WT = "WT"
TRACKING_MODES = (NT, WT)

TRAD = "trad"
PROPOSED = "proposed"
EMPC_STAR = "empc_star"
VARIANTS = (TRAD, PROPOSED, EMPC_STAR)

SOC_LOW_THRESHOLD = 0.5


@dataclass(frozen=True)
class ForecastSlice:
    """Load and PV forecasts (kW) covering ``window``."""

    window: HorizonWindow
    load_kw: np.ndarray
    pv_kw: np.ndarray

    def __post_init__(self):
        n = len(self.window)
        if len(self.load_kw) != n or len(self.pv_kw) != n:
            raise ValueError("forecast length does not match the window")

    @property
    def net_kw(self) -> np.ndarray:
        return np.asarray(self.load_kw, float) - np.asarray(self.pv_kw, float)

    @classmethod
    def perfect(cls, load, pv, window: HorizonWindow) -> "ForecastSlice":
        """Slice of the realized series, i.e. a perfect forecast."""
        sl = slice(window.start, window.end + 1)
        return cls(window, np.asarray(load[sl], float), np.asarray(pv[sl], float))


@dataclass(frozen=True)
class AugmentedState:
    """SOC together with the NC/OP peak-tracker states."""

    x: float
    y_nc: float
    y_op: float


@dataclass
class DispatchPlan:
    """Optimal open-loop plan over ``window``; ``x`` has one extra terminal entry."""

    window: HorizonWindow
    u1: np.ndarray
    u2: np.ndarray
    x: np.ndarray
    objective: float
    y_nc: Optional[np.ndarray] = None
    y_op: Optional[np.ndarray] = None
    peaks: Optional["ReferencePeaks"] = None
    threshold_relaxed: bool = False

    def state(self, i: int) -> AugmentedState:
        """Augmented state ``i`` steps into the plan (only for tracker plans)."""
        return AugmentedState(float(self.x[i]), float(self.y_nc[i]), float(self.y_op[i]))


@dataclass
class ReferenceTrajectory:
    """Reference SOC and inputs computed at step ``origin`` over ``window``."""

    origin: int
    window: HorizonWindow
    x_r: np.ndarray
    u_r1: np.ndarray
    u_r2: np.ndarray
    objective: float = np.nan
    threshold_relaxed: bool = False

    def x_at(self, k: int) -> float:
        if not self.window.start <= k <= self.window.end + 1:
            raise IndexError(f"step {k} outside the reference window")
        return float(self.x_r[k - self.origin])


@dataclass(frozen=True)
class ReferencePeaks:
    """Peaks read off a reference trajectory for target step ``k``.

    ``y_hat_*`` is the reference peak of the month containing ``k - 1``
    (floored at the tracked peak at the origin); ``y_check_*`` is the
    reference peak of ``k``'s month from ``k`` onward.
    """

    k: int
    origin: int
    y_hat_nc: float
    y_check_nc: float
    y_hat_op: float
    y_check_op: float


class _Storage(NamedTuple):
    u1: np.ndarray
    dis: np.ndarray  # discharge part of u2
    chg: np.ndarray  # charge part of u2
    x: np.ndarray

    def u2(self, sol: np.ndarray) -> np.ndarray:
        return sol[self.dis] - sol[self.chg]


def _storage_program(model: PwlModel, x_t: float, net: np.ndarray, bess: BessParams,
                     dt_hours: float) -> _Storage:
    """Variables and rows shared by every program.

    The battery power is split as ``u2 = dis - chg`` with both parts in
    ``[0, u2_max]``. With a positive loss rate an optimum never uses both
    parts at once, so ``dis + chg = |u2|`` and the loss term stays linear.
    """
    n = len(net)
    u1 = model.add_variables(n, name="u1")
    dis = model.add_variables(n, lb=0.0, ub=bess.power_kw, name="u2_dis")
    chg = model.add_variables(n, lb=0.0, ub=bess.power_kw, name="u2_chg")
    x = model.add_variables(n + 1, lb=bess.soc_min, ub=bess.soc_max, name="x")
    model.add_constraints([[x[0]]], [[1.0]], EQ, [x_t])
    rate = dt_hours / bess.energy_kwh
    # x(k+1) - x(k) + u2(k) dt / E = 0
    model.add_constraints(
        np.column_stack([x[1:], x[:-1], dis, chg]),
        np.tile([1.0, -1.0, rate, -rate], (n, 1)),
        EQ,
        0.0,
    )
    # u1(k) + u2(k) = L(k) - PV(k)
    model.add_constraints(np.column_stack([u1, dis, chg]), np.tile([1.0, 1.0, -1.0], (n, 1)),
                          EQ, net)
    return _Storage(u1, dis, chg, x)


def _energy_terms(model, st: _Storage, tariff, bess, dt_hours):
    model.add_objective(st.u1, tariff.r_ec * dt_hours)
    loss = bess.loss_rate(tariff, dt_hours)
    if loss > 0:
        model.add_objective(st.dis, loss)
        model.add_objective(st.chg, loss)


def _economic_program(t, x_t, forecast, window, peak_state, tracking, tariff, bess,
                      grid, threshold):
    if tracking not in TRACKING_MODES:
        raise ValueError(f"tracking must be one of {TRACKING_MODES}")
    if forecast.window != window:
        raise ValueError("forecast does not cover the window")
    if window.start != t:
        raise ValueError("window must start at the current step")
    dt_hours = grid.dt_hours
    model = PwlModel()
    st = _storage_program(model, x_t, forecast.net_kw, bess, dt_hours)
    _energy_terms(model, st, tariff, bess, dt_hours)
    u1, x = st.u1, st.x

    floor = peak_state if tracking == WT else PeakState()
    steps = window.steps
    in_month = steps <= grid.month_bounds(t)[1]
    model.add_max_term(tariff.r_nc, cols=u1[in_month], constants=(floor.p_nc,))
    op = in_month & grid.op[window.start:window.end + 1]
    if op.any():
        model.add_max_term(tariff.r_op, cols=u1[op], constants=(floor.p_op,))
    else:
        model.add_constant(tariff.r_op * max(0.0, floor.p_op))

    relaxed = False
    tau_hat = window.threshold_step
    if threshold is not None and tau_hat is not None and tau_hat <= window.end + 1:
        i = tau_hat - t
        floor, relaxed = reachable_threshold(threshold, x_t, i, bess, dt_hours)
        model.set_bounds(x[i], lb=max(model.lb[x[i]], floor))
    return model, st, relaxed


def reachable_threshold(threshold: float, x_t: float, n_steps: int, bess: BessParams,
                        dt_hours: float) -> tuple[float, bool]:
    """SOC floor for a threshold ``n_steps`` ahead, capped at what full charging reaches.

    Returns ``(floor, relaxed)``. The cap only binds when the state is too low
    to meet the threshold in time, which would otherwise make the program
    infeasible.
    """
    reach = min(bess.soc_max, x_t + n_steps * bess.power_kw * dt_hours / bess.energy_kwh)
    if reach < threshold:
        return reach, True
    return threshold, False


def trad_empc_plan(t: int, x_t: float, forecast: ForecastSlice, window: HorizonWindow,
                   peak_state: PeakState, tracking: str, tariff: TariffSchedule,
                   bess: BessParams, grid: TimeGrid, *, method: str = "highs",
                   threshold: Optional[float] = SOC_LOW_THRESHOLD) -> DispatchPlan:
    """Traditional economic MPC over ``window``.

    Minimizes energy cost, battery losses and the demand charge of the
    window's in-month steps, floored at the tracked peaks for ``WT`` and at
    zero for ``NT``.
    """
    model, st, relaxed = _economic_program(
        t, x_t, forecast, window, peak_state, tracking, tariff, bess, grid, threshold
    )
    sol, obj, _ = solve_model(model, method=method, context=f"trad plan at step {t}")
    return DispatchPlan(window, sol[st.u1], st.u2(sol), sol[st.x], obj,
                        threshold_relaxed=relaxed)


def build_reference(t: int, x_t: float, forecast: ForecastSlice, ref_win: HorizonWindow,
                    peak_state: PeakState, tracking: str, tariff: TariffSchedule,
                    bess: BessParams, grid: TimeGrid, *, method: str = "highs",
                    threshold: Optional[float] = SOC_LOW_THRESHOLD) -> ReferenceTrajectory:
    """Reference trajectory: the traditional program solved over ``ref_win``.

    The SOC update is driven by the battery power ``u_r2``.
    """
    model, st, relaxed = _economic_program(
        t, x_t, forecast, ref_win, peak_state, tracking, tariff, bess, grid, threshold
    )
    sol, obj, _ = solve_model(model, method=method, context=f"reference at step {t}")
    return ReferenceTrajectory(t, ref_win, sol[st.x], sol[st.u1], st.u2(sol), obj, relaxed)


def _check_peaks(ref, grid, k):
    """``y_check`` pair at ``k``; ``None`` when nothing of the reference lies at/after ``k``."""
    end = ref.window.end
    if grid.month_start[k]:
        return 0.0, 0.0
    if k > end:
        return None
    last = min(end, grid.month_bounds(k)[1])
    vals = ref.u_r1[k - ref.origin:last - ref.origin + 1]
    op = grid.op[k:last + 1]
    y_nc = float(vals.max())
    y_op = float(vals[op].max()) if op.any() else 0.0
    return max(y_nc, 0.0), max(y_op, 0.0)


def reference_peaks(k: int, ref: ReferenceTrajectory, peak_state_at_origin: PeakState,
                    grid: TimeGrid) -> ReferencePeaks:
    """Reference peaks for target step ``k`` (``origin <= k <= window.end + 1``).

    When no reference step lies at or after ``k`` (reference and prediction
    windows of equal length), the ``y_check`` values computed for ``k - 1``
    are reused. Negative reference peaks (net export) are floored at zero,
    which never changes the terminal cost since the trackers are nonnegative.
    """
    origin, end = ref.origin, ref.window.end
    if not origin <= k <= end + 1:
        raise IndexError(f"k={k} outside [{origin}, {end + 1}]")
    p = peak_state_at_origin
    y_hat_nc, y_hat_op = p.p_nc, p.p_op
    if k - 1 >= 0:
        first, last = grid.month_bounds(k - 1)
        lo, hi = max(first, origin), min(last, end)
        if lo <= hi:
            vals = ref.u_r1[lo - origin:hi - origin + 1]
            y_hat_nc = max(y_hat_nc, float(vals.max()))
            op = grid.op[lo:hi + 1]
            if op.any():
                y_hat_op = max(y_hat_op, float(vals[op].max()))

    check = _check_peaks(ref, grid, k)
    j = k
    while check is None:
        j -= 1
        check = _check_peaks(ref, grid, j)
    return ReferencePeaks(k, origin, y_hat_nc, check[0], y_hat_op, check[1])


def _proposed_program(t, x_t, peak_state, ref, forecast, window, tariff, bess, grid):
    if ref.origin != t or window.start != t:
        raise ValueError("reference and window must start at the current step")
    if window.end > ref.window.end:
        raise ValueError("reference window must cover the prediction window")
    if forecast.window != window:
        raise ValueError("forecast does not cover the window")
    dt_hours = grid.dt_hours
    n = len(window)
    model = PwlModel()
    st = _storage_program(model, x_t, forecast.net_kw, bess, dt_hours)
    _energy_terms(model, st, tariff, bess, dt_hours)
    u1, x = st.u1, st.x

    y_nc = model.add_variables(n + 1, name="y_nc")
    y_op = model.add_variables(n + 1, lb=0.0, name="y_op")
    model.set_bounds(y_nc[0], lb=peak_state.p_nc, ub=peak_state.p_nc)
    model.set_bounds(y_op[0], lb=peak_state.p_op, ub=peak_state.p_op)

    # the measured tracker is already reset when t opens a month, so only
    # month starts after t reset or bill inside the window
    starts = grid.month_start[t:t + n].copy()
    starts[0] = 0
    keep = 1.0 - starts
    # y(k+1) >= (1 - sigma(k)) y(k)
    for y in (y_nc, y_op):
        model.add_constraints(
            np.column_stack([y[:-1], y[1:]]),
            np.column_stack([keep, -np.ones(n)]),
            LE,
            0.0,
        )
    # y_nc(k+1) >= u1(k); y_op(k+1) >= u1(k) on on-peak steps
    model.add_constraints(np.column_stack([u1, y_nc[1:]]), [1.0, -1.0], LE, 0.0)
    op = grid.op[window.start:window.end + 1]
    if op.any():
        model.add_constraints(np.column_stack([u1[op], y_op[1:][op]]), [1.0, -1.0], LE, 0.0)

    billed = np.flatnonzero(starts)
    if billed.size:
        model.add_objective(y_nc[billed], tariff.r_nc)
        model.add_objective(y_op[billed], tariff.r_op)

    peaks = reference_peaks(window.end + 1, ref, peak_state, grid)
    model.add_max_term(tariff.r_nc, cols=[y_nc[n]], constants=(peaks.y_check_nc,))
    model.add_max_term(tariff.r_op, cols=[y_op[n]], constants=(peaks.y_check_op,))
    model.add_constant(-tariff.r_nc * peaks.y_hat_nc - tariff.r_op * peaks.y_hat_op)

    model.add_constraints([[x[n]]], [[1.0]], EQ, [ref.x_at(window.end + 1)])
    return model, st, y_nc, y_op, peaks


def proposed_empc_plan(t: int, x_t: float, peak_state: PeakState, ref: ReferenceTrajectory,
                       forecast: ForecastSlice, window: HorizonWindow, tariff: TariffSchedule,
                       bess: BessParams, grid: TimeGrid, *,
                       method: str = "highs") -> DispatchPlan:
    """MPC stage tracking a reference trajectory computed at the same step.

    The objective is the stage cost (energy, losses, and the tracked peaks
    billed at month starts inside the window) plus the terminal cost
    ``R * (max(y(end+1), y_check) - y_hat)`` per charge type. The plan must
    end at the reference SOC ``x_r(end + 1)``.
    """
    model, st, y_nc, y_op, peaks = _proposed_program(
        t, x_t, peak_state, ref, forecast, window, tariff, bess, grid
    )
    sol, obj, _ = solve_model(model, method=method, context=f"MPC stage at step {t}")
    return DispatchPlan(window, sol[st.u1], st.u2(sol), sol[st.x], obj, sol[y_nc], sol[y_op],
                        peaks)


@dataclass(frozen=True)
class PlantData:
    """Everything a controller needs besides the measured state."""

    grid: TimeGrid
    tariff: TariffSchedule
    bess: BessParams
    load_kw: np.ndarray
    pv_kw: np.ndarray

    def __post_init__(self):
        if len(self.load_kw) != self.grid.n_steps or len(self.pv_kw) != self.grid.n_steps:
            raise ValueError("series length does not match the grid")

    @property
    def net_kw(self) -> np.ndarray:
        return np.asarray(self.load_kw, float) - np.asarray(self.pv_kw, float)


@dataclass
class StepDecision:
    """First action of the solved plan plus audit data for the step."""

    u1: float
    u2: float
    plan: DispatchPlan
    reference: Optional[ReferenceTrajectory] = None
    month_crossing: bool = False
    terminal_gap: float = np.nan
    solve_time: float = 0.0
    threshold_relaxed: bool = False


@dataclass
class Controller:
    """Single-step receding-horizon policy; call it once per simulation step."""

    variant: str
    tracking: str
    mpc_spec: HorizonSpec
    ref_spec: Optional[HorizonSpec] = None
    method: str = "highs"
    threshold: Optional[float] = SOC_LOW_THRESHOLD
    _validated: set = field(default_factory=set, init=False, repr=False)

    def _validate(self, grid: TimeGrid) -> None:
        if id(grid) in self._validated:
            return
        self.mpc_spec.validate(grid)
        if self.ref_spec is not None:
            self.ref_spec.validate(grid)
        if self.variant == EMPC_STAR and self.mpc_spec.nominal_length_steps != grid.steps_per_day:
            raise ValueError("empc_star uses a 24 h prediction horizon")
        self._validated.add(id(grid))

    def _windows(self, t: int, grid: TimeGrid):
        window = mpc_window(grid, self.mpc_spec, t)
        if self.variant == TRAD:
            return window, None
        ref_win = mpc_window(grid, self.ref_spec, t)
        if self.variant == EMPC_STAR and window.end > ref_win.end:
            window = HorizonWindow(t, ref_win.end, window.threshold_step)
        if window.end > ref_win.end:
            raise ValueError(
                f"reference window ends at {ref_win.end}, before the prediction "
                f"window end {window.end}"
            )
        return window, ref_win

    def __call__(self, t: int, x_t: float, peak_state: PeakState, data: PlantData) -> StepDecision:
        grid = data.grid
        self._validate(grid)
        started = time.perf_counter()
        window, ref_win = self._windows(t, grid)
        fc = ForecastSlice.perfect(data.load_kw, data.pv_kw, window)
        ref = None
        gap = np.nan
        if self.variant == TRAD:
            plan = trad_empc_plan(t, x_t, fc, window, peak_state, self.tracking, data.tariff,
                                  data.bess, grid, method=self.method, threshold=self.threshold)
        else:
            ref = build_reference(
                t, x_t, ForecastSlice.perfect(data.load_kw, data.pv_kw, ref_win), ref_win,
                peak_state, self.tracking, data.tariff, data.bess, grid,
                method=self.method, threshold=self.threshold,
            )
            plan = proposed_empc_plan(t, x_t, peak_state, ref, fc, window, data.tariff,
                                      data.bess, grid, method=self.method)
            gap = abs(plan.x[-1] - ref.x_at(window.end + 1))
        crossing = bool(grid.month[window.end] != grid.month[t])
        return StepDecision(
            u1=float(plan.u1[0]),
            u2=float(plan.u2[0]),
            plan=plan,
            reference=ref,
            month_crossing=crossing,
            terminal_gap=float(gap),
            solve_time=time.perf_counter() - started,
            threshold_relaxed=(ref if ref is not None else plan).threshold_relaxed,
        )

    def programs(self, t: int, x_t: float, peak_state: PeakState,
                 data: PlantData) -> list:
        """The unsolved models of step ``t`` as ``[(stage, PwlModel), ...]``.

        For reference-tracking variants the reference is solved here, since
        the MPC stage depends on it.
        """
        grid = data.grid
        self._validate(grid)
        window, ref_win = self._windows(t, grid)
        fc = ForecastSlice.perfect(data.load_kw, data.pv_kw, window)
        if self.variant == TRAD:
            model = _economic_program(t, x_t, fc, window, peak_state, self.tracking,
                                      data.tariff, data.bess, grid, self.threshold)[0]
            return [("mpc", model)]
        ref_fc = ForecastSlice.perfect(data.load_kw, data.pv_kw, ref_win)
        ref_model = _economic_program(t, x_t, ref_fc, ref_win, peak_state, self.tracking,
                                      data.tariff, data.bess, grid, self.threshold)[0]
        ref = build_reference(t, x_t, ref_fc, ref_win, peak_state, self.tracking, data.tariff,
                              data.bess, grid, method=self.method, threshold=self.threshold)
        mpc_model = _proposed_program(t, x_t, peak_state, ref, fc, window, data.tariff,
                                      data.bess, grid)[0]
        return [("reference", ref_model), ("mpc", mpc_model)]


def make_controller(variant: str, tracking: str, mpc_spec: HorizonSpec,
                    ref_spec: Optional[HorizonSpec] = None, *, method: str = "highs",
                    threshold: Optional[float] = SOC_LOW_THRESHOLD) -> Controller:
    """Build the single-step policy for one case of the comparison matrix.

    ``empc_star`` defaults its reference to the remainder of the billing
    month. Combinations the algorithm cannot run are rejected here.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if tracking not in TRACKING_MODES:
        raise ValueError(f"tracking must be one of {TRACKING_MODES}")
    if mpc_spec.mode == MONTH:
        raise ValueError("the prediction horizon cannot be a full month")
    if variant == TRAD:
        if ref_spec is not None:
            raise ValueError("the traditional controller takes no reference horizon")
    elif variant == PROPOSED:
        if ref_spec is None:
            raise ValueError("the proposed controller needs a reference horizon")
        if ref_spec.mode != mpc_spec.mode:
            raise ValueError("reference and prediction horizons must use the same mode")
        if ref_spec.nominal_length_steps < mpc_spec.nominal_length_steps:
            raise ValueError("reference horizon shorter than the prediction horizon")
    else:
        if ref_spec is None:
            ref_spec = HorizonSpec(MONTH)
        if ref_spec.mode != MONTH:
            raise ValueError("empc_star needs a full-month reference horizon")
    return Controller(variant, tracking, mpc_spec, ref_spec, method=method, threshold=threshold)
