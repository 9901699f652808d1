import csv
from fractions import Fraction

import pytest
import yaml

from selfopt.harness import (CSV_COLUMNS, ConfigError, ProbePolicy, demo_necessity,
                             parse_experiment, run_all, run_experiment, three_mdp_class_config)
from selfopt.harness.cli import cli
from selfopt.harness.config import OUTPUT_ENV_VAR, load_experiment

TOGGLE = {"family": "mdp", "params": {"transition": [[[1, 0], [0, 1]], [[1, 0], [1, 0]]],
                                      "reward": [[1, 0], [0, 0]], "actions": ["a", "b"]}}


def singleton_doc(horizon=10_000):
    return {"schema_version": 1, "class": {"members": [TOGGLE]}, "true_member": 0,
            "horizon": horizon, "seeds": [0]}


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


# ---------------------------------------------------------------- config


def test_config_reports_every_problem():
    doc = {"schema_version": 2, "class": {"members": [{"family": "nope"}]}, "true_member": 4,
           "horizon": 0, "seeds": [], "agent": {"bogus": 1}}
    with pytest.raises(ConfigError) as info:
        parse_experiment(doc)
    assert len(info.value.problems) == 6


def test_config_rejects_unbuildable_class():
    doc = singleton_doc()
    doc["class"]["members"] = [{"family": "two_state_mdp", "params": {"q_good": 0.5}}]
    with pytest.raises(ConfigError, match="q_bad"):
        parse_experiment(doc)


def test_output_dir_precedence(monkeypatch, tmp_path):
    config = parse_experiment({**singleton_doc(), "output": "from_config"})
    monkeypatch.delenv(OUTPUT_ENV_VAR, raising=False)
    assert str(config.output_dir()) == "from_config"
    monkeypatch.setenv(OUTPUT_ENV_VAR, "from_env")
    assert str(config.output_dir()) == "from_env"
    assert str(config.output_dir("from_flag")) == "from_flag"


def test_weights_and_overrides():
    doc = three_mdp_class_config(horizon=100, seeds=[1])
    for m, w in zip(doc["class"]["members"], (1, 1, 2)):
        m["weight"] = w
    doc["class"]["members"][0]["overrides"] = {"eps0": 0.3, "d_constant": 40.0}
    spec = parse_experiment(doc).build_class()
    assert spec.weights == pytest.approx([0.25, 0.25, 0.5])
    assert spec.members[0].meta.epsilon_schedule(1) == pytest.approx(0.3)
    assert spec.members[0].meta.d(10, 0.1) == 40.0


# ---------------------------------------------------------------- experiment


def test_singleton_run_matches_optimal_value(tmp_path):
    summary = run_experiment(singleton_doc(), 0, tmp_path)
    rows = read_rows(tmp_path / summary.trajectory)
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 10_001
    assert [int(r[0]) for r in rows[1:]] == list(range(1, 10_001))
    assert summary.final_average == pytest.approx(summary.v_star, abs=1e-9)
    assert summary.phase_time.get("explore", 0) == 0 and summary.phase_time.get("prepare", 0) == 0
    assert {r[3] for r in rows[1:]} == {"-1"}


def test_three_mdp_run_schema_and_determinism(tmp_path):
    config = parse_experiment(three_mdp_class_config(1, 4_000, [5, 6]))
    first = run_all(config, tmp_path / "a")
    second = run_all(config, tmp_path / "b")
    for s in first:
        a = (tmp_path / "a" / s.trajectory).read_bytes()
        assert a == (tmp_path / "b" / s.trajectory).read_bytes()
        rows = read_rows(tmp_path / "a" / s.trajectory)[1:]
        assert len(rows) == 4_000 and sum(s.phase_time.values()) == 4_000
        assert {r[1] for r in rows} <= {"choose_t", "choose_e", "prepare", "exploit_to_k",
                                        "explore", "idle_t"}
        for r in rows:
            assert 0.0 <= float(r[7]) <= 1.0 and Fraction(r[6]) in (0, 1)
    index = read_rows(tmp_path / "a" / "runs_index.csv")
    assert [r[0] for r in index[1:]] == ["5", "6"]
    assert (tmp_path / "a" / "runs_index.csv").read_bytes() == \
        (tmp_path / "b" / "runs_index.csv").read_bytes()
    assert [s.final_average for s in first] == [s.final_average for s in second]


def test_parallel_workers_match_serial(tmp_path):
    config = parse_experiment(three_mdp_class_config(2, 1_500, [1, 2]))
    run_all(config, tmp_path / "serial")
    run_all(config, tmp_path / "parallel", workers=2)
    for name in ("trajectory_seed1.csv", "trajectory_seed2.csv", "runs_index.csv"):
        assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "parallel" / name).read_bytes()


# ---------------------------------------------------------------- necessity


def test_probe_plan():
    p = ProbePolicy(3)
    assert "".join(p.plan) == "abb" + "abbb" + "abbbb"
    assert p.block_ends == [3, 7, 12]


def test_necessity_report():
    report = demo_necessity(3, 2_000, 0)
    assert report.passed
    assert report.probe_dip == Fraction(1, 4) and report.probe_dip_step == 12
    assert report.always_a_min == report.always_a_max == 1
    assert all(v > Fraction(19, 10) for v in report.trap_final_averages.values())
    one = demo_necessity(1, 2_000, 0)
    assert one.trap_final_averages[1] == Fraction(1 + 0 + 2 * (2_000 - 2), 2_000)   # a: 1, b: 0, then b: 2 forever
    with pytest.raises(ValueError):
        demo_necessity(0, 100, 0)


# ---------------------------------------------------------------- command line


def test_cli_solve_example(capsys):
    assert cli(["solve", "--example", "two_state"]) == 0
    out = capsys.readouterr().out
    assert "gain: 1\n" in out and "    0       a" in out


def test_cli_solve_from_config(tmp_path, capsys):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"environment": {"family": "two_state_mdp",
                                                    "params": {"q_good": 0.7, "q_bad": 0.2}}}))
    assert cli(["--config", str(path), "solve"]) == 0
    assert "gain: 0.6" in capsys.readouterr().out


def test_cli_missing_config_leaves_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli(["run", "--config", str(tmp_path / "missing.yaml"), "--out", str(out)]) == 1
    assert not out.exists()
    assert "does not exist" in capsys.readouterr().err


def test_cli_invalid_config_leaves_nothing(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("schema_version: 1\nclass: {members: []}\nhorizon: -3\n")
    out = tmp_path / "out"
    assert cli(["run", "--config", str(path), "--out", str(out)]) == 1
    assert not out.exists()
    err = capsys.readouterr().err
    assert "class.members" in err and "horizon" in err


def test_cli_usage_errors(capsys):
    assert cli(["frobnicate"]) == 2
    assert cli(["run", "--bogus"]) == 2
    assert cli([]) == 2
    assert "usage" in capsys.readouterr().err


def test_cli_run_with_overrides(tmp_path, capsys):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(three_mdp_class_config(0, 10**6, [1, 2, 3])))
    assert cli(["run", "--config", str(path), "--out", str(tmp_path / "o"), "--seed", "9",
                "--horizon", "500"]) == 0
    files = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert files == ["runs_index.csv", "trajectory_seed9.csv"]
    assert len(read_rows(tmp_path / "o" / "trajectory_seed9.csv")) == 501
    assert load_experiment(path).horizon == 10**6


def test_cli_certify_passive(tmp_path, capsys):
    assert cli(["certify", "--example", "passive", "--trials", "10", "--out", str(tmp_path)]) == 0
    (report,) = tmp_path.iterdir()
    rows = read_rows(report)
    assert len(rows) == 17 and {r[9] for r in rows[1:]} == {"pass"}
    assert "PASS" in capsys.readouterr().out


def test_cli_certify_failed_verdict(tmp_path, capsys):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({
        "environment": {"family": "bandit_tower", "params": {"arms": [0.2, 0.4, 0.6, 0.99, 0.5]},
                        "overrides": {"d_constant": 0.0}},
        "certify": {"grid": {"k": [900], "n": [100], "eps": [0.01]}, "trials": 50,
                    "adversaries": ["worst_declared"]}}))
    assert cli(["certify", "--config", str(path)]) == 3
    assert "FAIL" in capsys.readouterr().out


def test_cli_demo_necessity(capsys):
    assert cli(["demo-necessity", "--S", "2", "--horizon", "500"]) == 0
    assert "verdict: PASS" in capsys.readouterr().out


def test_shipped_demo_configs_are_valid():
    from pathlib import Path
    from selfopt.harness.config import load_document
    demos = Path(__file__).resolve().parent.parent / "demos"
    config = load_experiment(demos / "three_mdps.yaml")
    assert config.true_member == 1 and len(config.seeds) == 10
    doc = load_document(demos / "passive_certify.yaml")
    assert doc["environment"]["family"] == "passive"
