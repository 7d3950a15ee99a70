"""Command-line entry point: subcommands, output files and exit codes."""

import json
import logging

import numpy as np
import pandas as pd
import pytest
import yaml

from main import main
from report import validate_report_json
from shared.data import OutcomeFamily
from simulation import SimScenario, TruthOracle

FAST_YAML = {
    "configuration": "PRISM_A",
    "filter": {"folds": 5, "n_lambda": 30},
    "ple": {"num_trees": 60},
}


@pytest.fixture
def fast_config_file(tmp_path):
    path = tmp_path / "fast.yaml"
    path.write_text(yaml.safe_dump(FAST_YAML), encoding="utf-8")
    return path


@pytest.fixture
def simulated_csv(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--n", "200", "--seed", "3", "--out", str(out)]) == 0
    return out / "trial.csv"


def test_simulate_writes_trial_and_sidecar(simulated_csv):
    sidecar = json.loads(simulated_csv.with_name("trial.json").read_text(encoding="utf-8"))
    assert sidecar["scenario"]["n"] == 200
    assert pd.read_csv(simulated_csv).shape == (200, 14)


def test_binary_simulate_sidecar_uses_oracle_truth(tmp_path):
    out = tmp_path / "binary"
    assert main(["simulate", "--family", "binary", "--n", "200", "--seed", "3", "--out", str(out)]) == 0
    sidecar = json.loads((out / "trial.json").read_text(encoding="utf-8"))
    scenario = SimScenario(outcome_family=OutcomeFamily.BINARY, n=200, seed=3)
    assert sidecar["population_ate"] is None
    assert sidecar["oracle_ate"] == pytest.approx(TruthOracle(scenario).effect())


def test_analyze_writes_every_output(tmp_path, simulated_csv, fast_config_file, capsys):
    out = tmp_path / "run"
    code = main(["analyze", "-i", str(simulated_csv), "--config", str(fast_config_file), "--out", str(out)])
    assert code == 0
    for name in ("report.json", "report.txt", "manifest.json", "forest.svg", "posterior.svg",
                 "univariate.svg", "run.log"):
        assert (out / name).exists(), name
    validate_report_json((out / "report.json").read_text(encoding="utf-8"))
    assert "Overall" in capsys.readouterr().out


def test_analyze_is_reproducible(tmp_path, simulated_csv, fast_config_file):
    for name in ("a", "b"):
        args = ["analyze", "-i", str(simulated_csv), "--config", str(fast_config_file),
                "--out", str(tmp_path / name), "--format", "json", "--seed", "9"]
        assert main(args) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_bootstrap_subcommand_saves_vectors(tmp_path, simulated_csv, fast_config_file):
    out = tmp_path / "boot"
    code = main(["bootstrap", "-i", str(simulated_csv), "--config", str(fast_config_file), "-B", "3",
                 "--save-vectors", "--format", "json", "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["bootstrap"]["resamples"] == 3
    vectors = json.loads((out / "bootstrap_vectors.json").read_text(encoding="utf-8"))
    assert all(len(v) == 3 for v in vectors["estimates"].values())


def test_missing_input_is_an_input_error(tmp_path):
    assert main(["analyze", "-i", str(tmp_path / "absent.csv"), "--out", str(tmp_path / "run")]) == 1


def test_invalid_config_is_an_input_error(tmp_path, simulated_csv):
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"bayes": {"alpha": 1.5}}), encoding="utf-8")
    assert main(["analyze", "-i", str(simulated_csv), "--config", str(bad), "--out", str(tmp_path / "run")]) == 1


def test_invalid_scenario_is_an_input_error(tmp_path):
    assert main(["simulate", "--n", "201", "--out", str(tmp_path / "sim")]) == 1


def test_stage_log_level_comes_from_settings(tmp_path, monkeypatch):
    monkeypatch.setenv("STAGE_LOG_LEVEL", "WARNING")
    assert main(["simulate", "--n", "200", "--seed", "3", "--out", str(tmp_path / "sim")]) == 0
    assert logging.getLogger("simulation").level == logging.WARNING
    assert logging.getLogger("Stages.workers.param_infer").level == logging.WARNING
    monkeypatch.setenv("STAGE_LOG_LEVEL", "INFO")
    assert main(["simulate", "--n", "200", "--seed", "3", "--out", str(tmp_path / "again")]) == 0
    assert logging.getLogger("simulation").level == logging.INFO


def test_unknown_stage_log_level_is_an_input_error(tmp_path, monkeypatch):
    monkeypatch.setenv("STAGE_LOG_LEVEL", "LOUD")
    assert main(["simulate", "--n", "200", "--out", str(tmp_path / "sim")]) == 1


def test_numeric_failure_exit_code(tmp_path):
    # fewer rows than the default cross-validation folds
    rng = np.random.default_rng(0)
    frame = pd.DataFrame({
        "y": rng.standard_normal(8),
        "a": [0, 1] * 4,
        "X1": rng.standard_normal(8),
        "X2": rng.standard_normal(8),
    })
    path = tmp_path / "tiny.csv"
    frame.to_csv(path, index=False)
    assert main(["analyze", "-i", str(path), "--out", str(tmp_path / "run")]) == 2
