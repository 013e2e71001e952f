"""Estimator-style wrapper around the closed-loop simulation."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .sim import ControllerConfig, ScenarioConfig, run_closed_loop
from .tariff import BessParams, PeakState, TariffSchedule


class EMPCDispatcher(BaseEstimator):
    """Battery dispatch policy evaluated in closed loop on a load/PV series.

    ``X`` is an ``(n_steps, 2)`` array of load and PV in kW on a grid that
    starts at ``start_date`` midnight and covers whole days. ``fit`` runs the
    closed loop and stores the trace and cost report; ``predict`` returns the
    battery power ``u2`` the policy applies to ``X``; ``score`` is the negated
    total cost, so higher is better.

    Parameters
    ----------
    variant, tracking, mode, t_mpc_hours, t_r_hours
        Controller selection, as in :class:`ControllerConfig`.
    r_ec, r_nc, r_op
        Energy rate ($/kWh) and NC/OP demand rates ($/kW-month).
    energy_kwh, power_kw, eta, soc_min, soc_max, soc_init
        Battery rating.
    start_date : str
        First simulated day, ``YYYY-MM-DD``.
    step_minutes : int
    initial_peak_nc, initial_peak_op : float
        Tracked peaks at the first step.
    solver : {"highs", "simplex"}
    """

    def __init__(self, variant="proposed", tracking="WT", mode="rolling", t_mpc_hours=48.0,
                 t_r_hours=48.0, r_ec=0.1, r_nc=24.48, r_op=19.19, energy_kwh=2500.0,
                 power_kw=700.0, eta=0.8, soc_min=0.2, soc_max=0.8, soc_init=0.5,
                 start_date="2019-01-01", step_minutes=15, initial_peak_nc=0.0,
                 initial_peak_op=0.0, solver="highs"):
        self.variant = variant
        self.tracking = tracking
        self.mode = mode
        self.t_mpc_hours = t_mpc_hours
        self.t_r_hours = t_r_hours
        self.r_ec = r_ec
        self.r_nc = r_nc
        self.r_op = r_op
        self.energy_kwh = energy_kwh
        self.power_kw = power_kw
        self.eta = eta
        self.soc_min = soc_min
        self.soc_max = soc_max
        self.soc_init = soc_init
        self.start_date = start_date
        self.step_minutes = step_minutes
        self.initial_peak_nc = initial_peak_nc
        self.initial_peak_op = initial_peak_op
        self.solver = solver

    def _scenario(self, n_steps: int) -> ScenarioConfig:
        spd = 1440 // self.step_minutes
        if n_steps % spd:
            raise ValueError(f"X must cover whole days ({spd} rows per day)")
        t_r = self.t_r_hours if self.variant == "proposed" else None
        return ScenarioConfig(
            controller=ControllerConfig(self.variant, self.tracking, self.mode,
                                        float(self.t_mpc_hours), t_r),
            tariff=TariffSchedule(self.r_ec, self.r_nc, self.r_op),
            bess=BessParams(self.energy_kwh, self.power_kw, self.eta, self.soc_min,
                            self.soc_max, self.soc_init),
            start_date=self.start_date,
            n_days=n_steps // spd,
            step_minutes=self.step_minutes,
            initial_peak=PeakState(self.initial_peak_nc, self.initial_peak_op),
            solver=self.solver,
        )

    def _simulate(self, X):
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns: load_kw, pv_kw")
        config = self._scenario(X.shape[0])
        trace, report = run_closed_loop(config, X[:, 0], X[:, 1])
        return config, trace, report

    def fit(self, X, y=None):
        self.config_, self.trace_, self.cost_report_ = self._simulate(X)
        self.n_features_in_ = 2
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "trace_")
        return self._simulate(X)[1].u2.copy()

    def score(self, X, y=None) -> float:
        check_is_fitted(self, "trace_")
        return -self._simulate(X)[2].annual_cost
