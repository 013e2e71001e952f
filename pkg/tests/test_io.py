import json
import logging

import numpy as np
import pytest
import yaml

from empc_dispatch.io import (ConfigError, GapError, LengthMismatchError, MalformedRowError,
                              OutputError, SpacingError, build_manifest, config_from_dict,
                              config_to_dict, emit_outputs, load_scenario_data,
                              load_timeseries, parse_config, read_trace, report_text,
                              resolve_log_level, settle_from_trace_file, write_timeseries)
from empc_dispatch.sim import CostReport, SimulationTrace, run_closed_loop
from empc_dispatch.synthetic import synthetic_series
from empc_dispatch.timegrid import build_grid


def base_tree(**overrides):
    tree = {
        "tariff": {"r_ec": 0.1, "r_nc": 24.48, "r_op": 19.19},
        "bess": {"energy_kwh": 2500, "power_kw": 700, "eta": 0.8, "soc_min": 0.2,
                 "soc_max": 0.8},
        "controller": {"variant": "proposed", "tracking": "WT", "mode": "rolling",
                       "t_mpc_hours": 48, "t_r_hours": 48},
        "data": {"synthetic_seed": 7},
        "sim": {"start_date": "2019-01-01", "n_days": 1, "step_minutes": 15},
    }
    for key, value in overrides.items():
        section, _, field = key.partition("__")
        if value is None:
            tree[section].pop(field)
        else:
            tree[section][field] = value
    return tree


def write_rows(path, rows):
    path.write_text("timestamp,load_kw,pv_kw\n" + "".join(f"{r}\n" for r in rows))


def day_rows(skip=()):
    grid = build_grid("2019-01-01", 1, 15)
    return [f"{grid.timestamp(t).isoformat()},100.0,20.0" for t in range(96)
            if grid.timestamp(t).strftime("%H:%M") not in skip]


class TestSeries:
    grid = build_grid("2019-01-01", 1, 15)

    def test_accepts_day(self, tmp_path):
        p = tmp_path / "s.csv"
        write_rows(p, day_rows())
        s = load_timeseries(p, self.grid)
        assert len(s) == 96 and s.load_kw[0] == 100.0

    def test_gap_names_timestamp(self, tmp_path):
        p = tmp_path / "s.csv"
        write_rows(p, day_rows(skip={"13:15"}))
        with pytest.raises(GapError, match="2019-01-01T13:15:00"):
            load_timeseries(p, self.grid)

    def test_spacing(self, tmp_path):
        p = tmp_path / "s.csv"
        write_rows(p, day_rows()[::2])
        with pytest.raises(SpacingError):
            load_timeseries(p, self.grid)

    @pytest.mark.parametrize("row", ["2019-01-01T00:00:00,abc,1", "2019-01-01T00:00:00,1",
                                     "2019-01-01T00:00:00,nan,1", "2019-01-01T00:00:00,-1,1",
                                     "yesterday,1,1"])
    def test_malformed(self, tmp_path, row):
        p = tmp_path / "s.csv"
        write_rows(p, [row])
        with pytest.raises(MalformedRowError):
            load_timeseries(p)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("time,load,pv\n")
        with pytest.raises(MalformedRowError):
            load_timeseries(p)

    def test_length(self, tmp_path):
        p = tmp_path / "s.csv"
        write_rows(p, day_rows()[:90])
        with pytest.raises(LengthMismatchError):
            load_timeseries(p, self.grid)
        write_rows(p, day_rows()[1:])
        with pytest.raises(LengthMismatchError):
            load_timeseries(p, self.grid)

    def test_round_trip(self, tmp_path):
        grid = build_grid("2019-03-01", 2, 15)
        load, pv = synthetic_series(grid, seed=4)
        p = tmp_path / "s.csv"
        write_timeseries(p, grid, load, pv)
        s = load_timeseries(p, grid)
        assert np.array_equal(s.load_kw, load) and np.array_equal(s.pv_kw, pv)


class TestConfig:
    def test_reference_site_config(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text(yaml.safe_dump(base_tree()))
        c = parse_config(p)
        assert c.bess.energy_kwh == 2500 and c.tariff.r_op == 19.19
        assert c.bess.soc_init == 0.5 and c.controller.label == "proposed_WT_rolling_48_48"

    @pytest.mark.parametrize("overrides", [
        {"bess__eta": 1.2},
        {"bess__soc_min": 0.9},
        {"tariff__r_nc": -1},
        {"controller__t_r_hours": 24},
        {"controller__t_r_hours": None},
        {"controller__variant": "greedy"},
        {"controller__tracking": "XT"},
        {"controller__t_mpc_hours": 30},
        {"sim__step_minutes": 7},
        {"sim__n_days": 0},
        {"sim__start_date": "2019-13-01"},
        {"sim__solver": "cplex"},
        {"data__series_path": "x.csv"},
        {"bess__capacity": 5},
    ])
    def test_rejections(self, overrides):
        with pytest.raises(ConfigError):
            config_from_dict(base_tree(**overrides))

    def test_trad_rejects_reference(self):
        tree = base_tree(controller__variant="trad")
        with pytest.raises(ConfigError):
            config_from_dict(tree)
        tree["controller"].pop("t_r_hours")
        assert config_from_dict(tree).controller.t_r_hours is None

    def test_supported_short_prediction(self):
        c = config_from_dict(base_tree(controller__mode="shrinking", controller__t_mpc_hours=24))
        assert c.controller.label == "proposed_WT_shrinking_24_48"

    def test_star_month_reference(self):
        c = config_from_dict(base_tree(controller__variant="empc_star",
                                        controller__t_mpc_hours=24,
                                        controller__t_r_hours="month"))
        assert c.controller.label == "empc_star_WT_rolling_24"

    def test_missing_section(self):
        tree = base_tree()
        del tree["tariff"]
        with pytest.raises(ConfigError):
            config_from_dict(tree)

    def test_round_trip(self):
        c = config_from_dict(base_tree())
        assert config_from_dict(config_to_dict(c)) == c

    def test_relative_series_path(self, tmp_path):
        tree = base_tree()
        tree["data"] = {"series_path": "s.csv"}
        p = tmp_path / "c.yaml"
        p.write_text(yaml.safe_dump(tree))
        c = parse_config(p)
        assert c.series_path == str(tmp_path / "s.csv")
        write_rows(tmp_path / "s.csv", day_rows())
        _, load, pv = load_scenario_data(c)
        assert len(load) == 96

    def test_missing_series_file(self, tmp_path):
        tree = base_tree()
        tree["data"] = {"series_path": "nope.csv"}
        c = config_from_dict(tree, tmp_path)
        with pytest.raises(Exception) as err:
            load_scenario_data(c)
        assert err.type.__name__ == "DataError"

    def test_bad_yaml(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("tariff: [unclosed\n")
        with pytest.raises(ConfigError):
            parse_config(p)


@pytest.fixture(scope="module")
def one_day_run():
    config = config_from_dict(base_tree(controller__variant="trad", controller__t_r_hours=None,
                                         controller__mode="shrinking",
                                         controller__t_mpc_hours=24))
    grid, load, pv = load_scenario_data(config)
    trace, report = run_closed_loop(config, load, pv)
    return config, trace, report


class TestEmit:
    def test_one_day(self, tmp_path, one_day_run):
        config, trace, report = one_day_run
        paths = emit_outputs(trace, report, build_manifest(config, trace, 1.0), tmp_path)
        assert sorted(p.name for p in paths) == ["manifest.json", "report.json", "report.txt",
                                                 "trace.csv"]
        cols = read_trace(tmp_path / "trace.csv")
        assert len(cols["t"]) == 96
        body = json.loads((tmp_path / "report.json").read_text())
        assert body["partial_months"] == ["2019-01"]
        assert "*" in (tmp_path / "report.txt").read_text()
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["n_steps"] == 96 and manifest["clamped_steps"] == 0

    def test_trace_file_settles_to_report(self, tmp_path, one_day_run):
        config, trace, report = one_day_run
        emit_outputs(trace, report, build_manifest(config, trace, 1.0), tmp_path)
        again = settle_from_trace_file(tmp_path / "trace.csv", config)
        assert again.to_dict() == report.to_dict()

    def test_rerun_byte_identical(self, tmp_path, one_day_run):
        config, _, _ = one_day_run
        for name in ("a", "b"):
            _, load, pv = load_scenario_data(config)
            trace, report = run_closed_loop(config, load, pv)
            emit_outputs(trace, report, build_manifest(config, trace, 0.0), tmp_path / name)
        assert (tmp_path / "a/report.json").read_bytes() == (tmp_path / "b/report.json").read_bytes()

    def test_empty_trace(self, tmp_path, one_day_run):
        _, trace, _ = one_day_run
        empty = SimulationTrace(trace.grid, *(np.zeros(0) for _ in range(2)), trace.x[:1],
                                *(np.zeros(0) for _ in range(7)))
        with pytest.raises(OutputError):
            emit_outputs(empty, CostReport(), {}, tmp_path)

    def test_report_text(self, one_day_run):
        _, _, report = one_day_run
        text = report_text(report, title="x")
        assert text.splitlines()[0] == "x" and "annual" in text


def test_log_level():
    assert resolve_log_level({}) == logging.WARNING
    assert resolve_log_level({"EMPC_LOG_LEVEL": "debug"}) == logging.DEBUG
    assert resolve_log_level({"EMPC_LOG_LEVEL": "15"}) == 15
    assert resolve_log_level({"EMPC_LOG_LEVEL": "chatty"}) == logging.WARNING
