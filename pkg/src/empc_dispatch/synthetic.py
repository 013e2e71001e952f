"""Seeded synthetic load and PV series for tests and demos."""

from __future__ import annotations

import numpy as np

from .timegrid import TimeGrid


def synthetic_series(grid: TimeGrid, seed: int = 0, base_kw: float = 180.0,
                     daily_kw: float = 60.0, pv_peak_kw: float = 250.0,
                     spikes_per_month: float = 6.0, spike_kw: float = 120.0):
    """Return ``(load_kw, pv_kw)`` aligned to ``grid``.

    Load is a base level with a seasonal swing, an evening-heavy daily
    sinusoid, AR(1) noise and a handful of random multi-hour peaks. PV is a
    half-sine over a seasonally varying day length, scaled by a per-day
    cloudiness factor. Identical ``(grid, seed)`` give identical series.
    """
    rng = np.random.default_rng(seed)
    n = grid.n_steps
    hour = grid.minute_of_day / 60.0
    doy = np.array([grid.date_of_day(d).timetuple().tm_yday for d in range(grid.n_days)])
    season = np.cos(2 * np.pi * (doy[grid.day] - 200) / 365.0)  # +1 in mid-July

    daily = daily_kw * (0.6 * np.sin(2 * np.pi * (hour - 12.0) / 24.0)
                        + 0.4 * np.sin(4 * np.pi * (hour - 15.0) / 24.0))
    noise = np.empty(n)
    eps = rng.normal(0.0, 8.0, n)
    acc = 0.0
    for t in range(n):
        acc = 0.9 * acc + eps[t]
        noise[t] = acc
    load = base_kw * (1.0 + 0.15 * season) + daily + noise

    spd = grid.steps_per_day
    n_spikes = rng.poisson(spikes_per_month * grid.n_days / 30.0)
    for _ in range(n_spikes):
        start = rng.integers(0, n)
        length = max(1, int(rng.integers(1, 4) * spd / 24))
        load[start:start + length] += spike_kw * rng.uniform(0.4, 1.0)
    load = np.maximum(load, 0.0)

    half_day = 6.0 + 1.5 * season  # hours from solar noon to sunset
    arg = (hour - 12.5) / half_day
    shape = np.where(np.abs(arg) < 1.0, np.cos(0.5 * np.pi * arg), 0.0)
    cloud = rng.uniform(0.35, 1.0, grid.n_days)[grid.day]
    pv = pv_peak_kw * cloud * shape
    return load, np.maximum(pv, 0.0)
