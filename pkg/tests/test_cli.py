import json

import pytest
import yaml

from empc_dispatch.cli import main
from empc_dispatch.io import load_timeseries

from test_io import base_tree


def write_config(tmp_path, tree):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump(tree))
    return str(p)


def trad_day(**kw):
    tree = base_tree(controller__variant="trad", controller__t_r_hours=None,
                      controller__mode="shrinking", controller__t_mpc_hours=24)
    tree["sim"].update(step_minutes=60, **kw)
    return tree


def test_run(tmp_path, capsys):
    cfg = write_config(tmp_path, trad_day())
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
    assert "annual" in capsys.readouterr().out
    report = json.loads((tmp_path / "out/report.json").read_text())
    assert report["scenario"] == "trad_WT_shrinking_24"


def test_run_config_error(tmp_path):
    tree = trad_day()
    tree["bess"]["eta"] = 1.2
    assert main(["run", "--config", write_config(tmp_path, tree)]) == 3
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == 3


def test_run_data_error(tmp_path):
    tree = trad_day()
    tree["data"] = {"series_path": "s.csv"}
    (tmp_path / "s.csv").write_text("timestamp,load_kw,pv_kw\n2019-01-01T00:00:00,1,0\n"
                                    "2019-01-01T02:00:00,1,0\n")
    assert main(["run", "--config", write_config(tmp_path, tree)]) == 4


def test_run_solver_error(tmp_path, monkeypatch):
    import empc_dispatch.controllers as controllers
    from empc_dispatch.optimizer import INFEASIBLE, LpSolution, SolverError

    def fail(*args, **kwargs):
        raise SolverError(LpSolution(INFEASIBLE, float("nan"), None), "forced")

    monkeypatch.setattr(controllers, "solve_model", fail)
    cfg = write_config(tmp_path, trad_day())
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 5


def test_usage_error():
    with pytest.raises(SystemExit) as err:
        main(["run"])
    assert err.value.code == 2


def test_gen_data(tmp_path):
    out = tmp_path / "d/series.csv"
    assert main(["gen-data", "--days", "2", "--seed", "5", "--out", str(out)]) == 0
    s = load_timeseries(out)
    assert len(s) == 192
    again = tmp_path / "again.csv"
    main(["gen-data", "--days", "2", "--seed", "5", "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_gen_data_bad_step(tmp_path):
    assert main(["gen-data", "--days", "1", "--seed", "0", "--step-minutes", "7",
                 "--out", str(tmp_path / "x.csv")]) == 3


def test_dump_lp(tmp_path):
    highspy = pytest.importorskip("highspy")
    tree = base_tree()
    tree["sim"].update(n_days=3, step_minutes=60)
    cfg = write_config(tmp_path, tree)
    out = tmp_path / "step.lp"
    assert main(["dump-lp", "--config", cfg, "--step", "5", "--stage", "mpc",
                 "--out", str(out)]) == 0
    text = out.read_text()
    assert "step 5 stage mpc" in text and "Subject To" in text
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(out))
    h.run()
    assert h.getModelStatus() == highspy.HighsModelStatus.kOptimal
    assert main(["dump-lp", "--config", cfg, "--step", "999"]) == 3


def test_compare(tmp_path, capsys):
    tree = trad_day()
    tree["sim"]["n_days"] = 2
    cfg = write_config(tmp_path, tree)
    cases = "trad_NT_shrinking_24,proposed_WT_rolling_24_48"
    assert main(["compare", "--config", cfg, "--cases", cases,
                 "--out", str(tmp_path / "cmp")]) == 0
    table = json.loads((tmp_path / "cmp/comparison.json").read_text())
    assert set(table) == set(cases.split(","))
    assert (tmp_path / "cmp/trad_NT_shrinking_24/report.json").exists()
    assert "lowest annual cost" in capsys.readouterr().out
    assert main(["compare", "--config", cfg, "--cases", "bogus"]) == 3


def test_output_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = write_config(tmp_path, trad_day())
    assert main(["run", "--config", cfg, "--out", str(blocker / "sub")]) == 6
