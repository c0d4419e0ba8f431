import csv
import json

import numpy as np
import pytest

from auvgame import lq
from auvgame.cli import main, sweep_points
from auvgame.scenario import (ScenarioError, attach_oracle, builtin_scenario_doc, builtin_scenarios,
                              condition_report, load_builtin, load_scenario, read_json,
                              scenario_from_dict)


def write(path, doc):
    path.write_text(json.dumps(doc))
    return path


def short_lq(**changes):
    doc = builtin_scenario_doc("lq_double_integrator")
    doc.update(duration=2.0, dt=0.01)
    doc.update(changes)
    return doc


def test_builtins_load():
    names = builtin_scenarios()
    assert {"lq_double_integrator", "lq_scalar", "auv_station_keeping"} <= set(names)
    for name in names:
        sc = load_builtin(name)
        assert sc.samples.N >= sc.basis.m


def test_auv_builtin_sizes():
    sc = load_builtin("auv_station_keeping")
    assert (sc.plant.n, sc.plant.k, sc.basis.m, sc.samples.N) == (12, 6, 78, 312)
    assert sc.extras["ultimate_bound"] == 2.0


def test_overrides_apply():
    sc = load_builtin("lq_double_integrator", {"dt": 0.02, "duration": 1.0, "seed": None})
    assert (sc.dt, sc.duration, sc.n_steps) == (0.02, 1.0, 50)


@pytest.mark.parametrize("change, field", [
    ({"duration": 0.0}, "duration"),
    ({"dt": -1.0}, "dt"),
    ({"initial_state": [0.1]}, "initial_state"),
    ({"cost": {"Q": 1.0, "R": 1.0, "gamma": -1.0}}, "cost"),
    ({"cost": {"Q": [1.0, 2.0, 3.0], "gamma": 1.0}}, "cost"),
    ({"gains": {"eta_c": -1.0}}, "gains"),
    ({"basis": {"name": "fourier"}}, "basis"),
    ({"basis": {"name": "quadratic", "dim": 3}}, "basis"),
    ({"samples": {"N": 2, "half_width": 1.0}}, "samples"),
    ({"weights": {"init": "values", "Wc": [1.0]}}, "weights"),
    ({"disturbance": {"kind": "tsunami"}}, "disturbance"),
    ({"plant": {"kind": "linear", "benchmark": "pendulum"}}, "plant"),
])
def test_field_diagnostics(change, field):
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(short_lq(**change))
    assert info.value.field == field
    assert str(info.value).startswith(field + ":")


def test_missing_key_named():
    doc = short_lq()
    del doc["gains"]
    with pytest.raises(ScenarioError, match="gains: missing key 'gains'"):
        scenario_from_dict(doc)


def test_malformed_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "dt": 0.01,\n  "duration": ,\n}')
    with pytest.raises(ScenarioError, match="line 3, column 15"):
        read_json(p)


def test_inline_linear_plant_and_values_weights():
    doc = short_lq(plant={"kind": "linear", "A": [[-1.0]], "B": [[1.0]]}, initial_state=[0.5],
                   samples={"N": 3, "half_width": 1.0},
                   weights={"init": "values", "Wc": [0.3], "W_bar": 5.0})
    sc = scenario_from_dict(doc)
    assert sc.initial_weights.Wc.tolist() == [0.3]
    assert sc.plant.n == 1


def test_vehicle_file_relative_to_scenario(tmp_path):
    from auvgame.vehicle import VehicleParams
    vdoc = VehicleParams.default().to_dict()
    write(tmp_path / "veh.json", vdoc)
    doc = builtin_scenario_doc("auv_station_keeping")
    doc["plant"]["vehicle"] = "veh.json"
    doc["samples"]["N"] = 78
    sc = load_scenario(write(tmp_path / "s.json", doc))
    np.testing.assert_array_equal(sc.plant.params.M, VehicleParams.default().M)


def test_oracle_attachment():
    orc = attach_oracle(load_builtin("lq_double_integrator"))
    assert orc["status"] == "ok" and orc["exact"]
    np.testing.assert_allclose(orc["W"], [1.81917593, 2.30940108, 2.10060343], atol=1e-8)
    bad = attach_oracle(scenario_from_dict(short_lq(cost={"Q": 1.0, "R": 1.0, "gamma": 0.9})))
    assert bad["status"] == "nonconverged" and "residual_history" in bad
    auv = attach_oracle(load_builtin("auv_station_keeping"))
    assert auv["status"] == "ok" and not auv["exact"]


def test_condition_report_reductions():
    rep = condition_report(load_builtin("lq_double_integrator"))
    assert rep["Q_sc"]["rhs"] == 0.0
    assert rep["Wc_sc"]["rhs"] == pytest.approx((1.0 + 1.0) / (2 * 2.0))
    assert rep["r_gam_cond"]["pass"] is False
    assert rep["rank"]["rank"] == 3


# --------------------------------------------------------------------------
# command line
# --------------------------------------------------------------------------


def test_run_missing_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 1
    assert "config error" in capsys.readouterr().err


def test_run_zero_duration(tmp_path):
    p = write(tmp_path / "s.json", short_lq(duration=0.0))
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 1


def test_run_malformed_json(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text('{"dt": 0.01,, }')
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "line 1" in capsys.readouterr().err


def test_run_lq_with_oracle(tmp_path):
    p = write(tmp_path / "s.json", short_lq(oracle=False))
    out = tmp_path / "o"
    assert main(["run", str(p), "--out", str(out), "--oracle"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["metrics"]["weight_errors"]) >= {"Wc_rel_error", "Wa1_rel_error", "Wa2_rel_error"}
    assert summary["oracle"]["status"] == "ok"
    cond = json.loads((out / "conditions.json").read_text())
    assert {"Q_sc", "Wc_sc", "r_gam_cond"} <= set(cond["initial"])
    with open(out / "trajectory.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "t" and len(rows) == 202


def test_run_flag_overrides(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "lq_double_integrator", "--out", str(out), "--dt", "0.05", "--duration", "0.5",
                 "--seed", "3", "--no-oracle"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert (summary["dt"], summary["duration"], summary["seed"]) == (0.05, 0.5, 3)
    assert "oracle" not in summary


def test_run_divergence_exit_code(tmp_path):
    doc = short_lq(plant={"kind": "linear", "A": [[2.0]], "B": [[1.0]]}, initial_state=[1.0],
                   samples={"N": 2, "half_width": 1.0}, weights={"init": "zeros", "W_bar": 1.0},
                   gains={"eta_c": 0.0, "eta_a1": 0.0, "eta_a2": 0.0}, divergence_bound=5.0,
                   oracle=False, duration=5.0)
    out = tmp_path / "o"
    assert main(["run", str(write(tmp_path / "s.json", doc)), "--out", str(out)]) == 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["metrics"]["status"] == "diverged"
    assert summary["metrics"]["divergence_time"] == pytest.approx(np.log(5.0) / 2, abs=0.02)


def test_verify_passes(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "measured" in out and "tolerance" in out
    assert "gare_scalar_closed_form" in out and "FAIL" not in out


def test_verify_corrupted_tolerance(capsys):
    assert main(["verify", "--tol", "coriolis_skew=-1"]) == 3
    line = [l for l in capsys.readouterr().out.splitlines() if l.startswith("coriolis_skew")][0]
    assert line.endswith("FAIL") and "-1.0e+00" in line


def test_verify_unknown_check():
    assert main(["verify", "--tol", "nonsense=1"]) == 1


def test_sweep_points_grid():
    pts = sweep_points({"eta_c": [1, 2], "gamma": [2, 3, 4]})
    assert len(pts) == 6 and pts[0] == {"eta_c": 1.0, "gamma": 2.0}
    with pytest.raises(ValueError):
        sweep_points({"eta_c": []})
    with pytest.raises(ValueError):
        sweep_points({"zeta": [1]})


def test_sweep_single_point_matches_run(tmp_path):
    scen = write(tmp_path / "s.json", short_lq())
    man = write(tmp_path / "m.json", {"scenario": "s.json", "axes": {"eta_c": [2.0]}})
    assert main(["sweep", str(man), "--out", str(tmp_path / "sw"), "--workers", "1"]) == 0
    assert main(["run", str(scen), "--out", str(tmp_path / "r")]) == 0
    sub = next(p for p in (tmp_path / "sw").iterdir() if p.is_dir())
    for name in ("trajectory.csv", "summary.json", "conditions.json"):
        assert (sub / name).read_bytes() == (tmp_path / "r" / name).read_bytes()


def test_sweep_three_points_parallel_matches_serial(tmp_path):
    write(tmp_path / "s.json", short_lq())
    man = write(tmp_path / "m.json", {"scenario": "s.json", "axes": {"eta_c": [1.0, 2.0, 4.0]}})
    assert main(["sweep", str(man), "--out", str(tmp_path / "a"), "--workers", "3"]) == 0
    assert main(["sweep", str(man), "--out", str(tmp_path / "b"), "--workers", "1"]) == 0
    subs = sorted(p.name for p in (tmp_path / "a").iterdir() if p.is_dir())
    assert len(subs) == 3
    with open(tmp_path / "a" / "index.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3 and all(r["status"] == "completed" for r in rows)
    assert [float(r["eta_c"]) for r in rows] == [1.0, 2.0, 4.0]
    assert (tmp_path / "a" / "index.csv").read_bytes() == (tmp_path / "b" / "index.csv").read_bytes()
    for s in subs:
        assert (tmp_path / "a" / s / "trajectory.csv").read_bytes() == \
            (tmp_path / "b" / s / "trajectory.csv").read_bytes()


def test_sweep_marks_infeasible_gamma(tmp_path, capsys):
    write(tmp_path / "s.json", short_lq())
    man = write(tmp_path / "m.json", {"scenario": "s.json", "axes": {"gamma": [2.0, 0.9]},
                                      "oracle": True})
    assert main(["sweep", str(man), "--out", str(tmp_path / "sw"), "--workers", "1"]) == 2
    with open(tmp_path / "sw" / "index.csv") as fh:
        rows = {float(r["gamma"]): r for r in csv.DictReader(fh)}
    assert rows[2.0]["status"] == "completed"
    assert rows[0.9]["status"] in ("nonconverged", "diverged")
    assert rows[0.9]["oracle_status"] == "nonconverged"


def test_sweep_bad_manifest(tmp_path):
    man = write(tmp_path / "m.json", {"scenario": "lq_double_integrator", "axes": {"eta_c": []}})
    assert main(["sweep", str(man), "--out", str(tmp_path / "sw")]) == 1
    man2 = write(tmp_path / "m2.json", {"axes": {"eta_c": [1.0]}})
    assert main(["sweep", str(man2), "--out", str(tmp_path / "sw")]) == 1
