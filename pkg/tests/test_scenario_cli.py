import csv

import pytest
import yaml

from rrcstorm import cli, runner
from rrcstorm.scenario import Point, Scenario, SchemaError


def tiny(tmp_path, **sections):
    data = {"population": {"n_ues": 20, "attacker_fractions": [0.0, 0.1]},
            "attack": {"tau_mean_s": [0, 6], "activation_start_s": 100.0,
                       "activation_end_s": 200.0},
            "rrc": {"pch_enabled": [False]},
            "simulation": {"duration_s": 900.0, "window_start_s": 300.0,
                           "window_end_s": 900.0, "seeds": [1, 2]}}
    for k, v in sections.items():
        data.setdefault(k, {}).update(v)
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def test_defaults_reproduce_the_published_experiment():
    scn = Scenario.load()
    assert scn.n_ues == 1000
    assert scn["population"]["attacker_fractions"] == [0.01, 0.02, 0.04, 0.08, 0.12, 0.16, 0.20]
    assert scn["attack"]["tau_mean_s"] == [0, 1, 2, 4, 6, 10, 14, 20, 30]
    assert scn["simulation"]["duration_s"] == 2.5 * 3600
    assert scn.seeds == [1, 2, 3, 4, 5]
    assert len(scn.points()) == 2 * 7 * 9


def test_unknown_keys_are_rejected_with_path(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("rrc:\n  t1: 5\n")
    with pytest.raises(SchemaError) as e:
        Scenario.load(p)
    assert e.value.path == "rrc.t1"
    with pytest.raises(SchemaError) as e:
        Scenario.load(overrides=["network.ue_rnc_delay=0.1"])
    assert e.value.path == "network.ue_rnc_delay"


@pytest.mark.parametrize("override,path", [
    ("rrc.t1_s=-1", "rrc.t1_s"),
    ("population.n_ues=abc", "population.n_ues"),
    ("attacker_fraction=[0.5, 2]", "population.attacker_fractions[1]"),
    ("engine=fast", "engine"),
    ("simulation.window_start_s=600", "simulation.window_start_s"),
    ("web.image_len_kb={kind: gamma}", "web.image_len_kb"),
])
def test_bad_values_name_the_field(override, path):
    with pytest.raises(SchemaError) as e:
        Scenario.load(overrides=[override])
    assert e.value.path == path


def test_scalar_override_of_sweep_axis():
    scn = Scenario.load(overrides=["attacker_fraction=0", "tau_mean_s=2", "pch_enabled=false"])
    assert scn.points() == [Point(2.0, 0.0, False)]


def test_capacity_scaling_of_service_times():
    scn = Scenario.load(overrides=["n_ues=200"])
    st, so = scn.service_times()
    assert st == pytest.approx(5 * scn["rnc"]["transition_service_s"])
    assert so == pytest.approx(5 * scn["rnc"]["other_service_s"])


def test_analytic_single_point_gives_one_row(tmp_path):
    scn = Scenario.load(overrides=["engine=analytic", "attacker_fraction=0.1", "tau_mean_s=2",
                                   "pch_enabled=true"])
    res = runner.run(scn, tmp_path)
    assert len(res["analytic"]) == 1
    rows = runner.read_csv(tmp_path / "analytic.csv")
    assert list(rows[0])[:11] == runner.ANALYTIC_COLS[:11]
    assert rows[0]["converged"] is True


def test_zero_fraction_override_gives_zero_attack_columns(tmp_path):
    scn = Scenario.load(overrides=["engine=analytic", "attacker_fraction=0"])
    rows = runner.run(scn, tmp_path)["analytic"]
    assert rows and all(r["gamma_r_attack"] == 0 and r["gamma_c_attack"] == 0 for r in rows)


def test_run_writes_both_engines_on_a_shared_grid(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", "--scenario", str(tiny(tmp_path)), "--out", str(out)]) == 0
    for f in ("simulation.csv", "analytic.csv", "comparison.csv", "manifest.yaml",
              "fig6_ran_load.csv", "fig7_cn_load.csv", "fig8a_response_time.csv",
              "fig8b_rnc_wait.csv", "fig9_channel_utilization.csv"):
        assert (out / f).exists(), f
    sim = runner.read_csv(out / "simulation.csv")
    an = runner.read_csv(out / "analytic.csv")
    keys = {(r["tau_mean_s"], r["attacker_fraction"], r["pch"]) for r in sim}
    assert keys == {(r["tau_mean_s"], r["attacker_fraction"], r["pch"]) for r in an}
    assert {r["seed"] for r in sim} == {1.0, 2.0, "mean", "stderr"}
    assert (out / "simulation.csv").read_text().startswith("# ran/cn message counts")


def test_manifest_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["--seed-offset", "3", "--set", "simulation.seeds=[1]"]
    assert cli.main(["run", "--scenario", str(tiny(tmp_path)), "--out", str(a)] + args) == 0
    assert cli.main(["run", "--scenario", str(a / "manifest.yaml"), "--out", str(b)]) == 0
    for f in ("simulation.csv", "analytic.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    assert yaml.safe_load((a / "manifest.yaml").read_text())["simulation"]["seeds"] == [4]


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    assert cli.main(["run", "--engine", "analytic", "--set", "nope=1", "--out",
                     str(tmp_path)]) == 2
    assert "nope" in capsys.readouterr().err

    def boom(*a, **k):
        raise FloatingPointError("diverged")

    monkeypatch.setattr(runner, "solve_congestion", boom)
    code = cli.main(["run", "--engine", "analytic", "--set", "attacker_fraction=0.1",
                     "--set", "tau_mean_s=2", "--set", "pch_enabled=true", "--out", str(tmp_path)])
    assert code == 3
    err = capsys.readouterr().err
    assert "tau_mean_s=2.0" in err and "attacker_fraction=0.1" in err


def test_compare(tmp_path, capsys):
    scn = Scenario.load(overrides=["engine=analytic", "attacker_fraction=[0.05]",
                                   "tau_mean_s=[1, 5]"])
    runner.run(scn, tmp_path)
    f = tmp_path / "analytic.csv"
    rep = runner.compare(f, f)
    assert rep.max_dev_r == 0 and rep.mean_dev_c == 0 and len(rep.rows) == 4
    assert cli.main(["compare", str(f), str(f), "--out", str(tmp_path / "r.csv")]) == 0
    assert "max=0.0000" in capsys.readouterr().out
    empty = tmp_path / "empty.csv"
    empty.write_text(",".join(runner.ANALYTIC_COLS) + "\n")
    with pytest.raises(runner.GridMismatch):
        runner.compare(empty, f)
    other = tmp_path / "other"
    runner.run(Scenario.load(overrides=["engine=analytic", "attacker_fraction=[0.05]",
                                        "tau_mean_s=[1]"]), other)
    assert cli.main(["compare", str(f), str(other / "analytic.csv")]) == 2


def test_calibrate_writes_overlay(tmp_path):
    path = tiny(tmp_path, population={"attacker_fractions": [0.0]})
    out = tmp_path / "cal"
    assert cli.main(["calibrate", "--scenario", str(path), "--out", str(out)]) == 0
    overlay = yaml.safe_load((out / "calibration.yaml").read_text())
    a = overlay["analytic"]
    assert a["lambda_h_per_s"] > 0 and a["processing_scale"] > 0
    # the overlay is itself a valid scenario fragment
    Scenario.load(out / "calibration.yaml")
    with open(out / "calibration_fit.csv") as fh:
        rows = list(csv.DictReader(fh))
    util = [r for r in rows if r["quantity"] == "util"][0]
    assert float(util["analytic"]) == pytest.approx(float(util["simulation"]), rel=0.10)
