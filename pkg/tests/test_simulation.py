"""Simulated trials and Monte Carlo subgroup truth."""

import json

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from shared.config import EffectSetting
from shared.data import CovariateKind, OutcomeFamily, dataset_hash, load_csv
from shared.errors import EmptyOracleCellError
from shared.random_streams import RandomStreams
from Stages.workers.submod_trees.tree import Condition, SubgroupRule
from simulation import (
    SimScenario,
    TruthOracle,
    generate_covariates,
    generate_trial,
    oracle_true_subgroup_effect,
    outcome_mean,
    population_ate,
    population_cell_prevalences,
    scenario_ate,
    true_benefit,
    true_effect,
    true_subgroup_partition,
    write_simulation,
)
from simulation.generator import CELL_EFFECTS, TABLE_PREVALENCE, cell_index, correlation_matrix


@pytest.fixture(scope="module")
def large_covariates() -> pd.DataFrame:
    return generate_covariates(200_000, 6, np.random.default_rng(42))


def _scenario(**kwargs) -> SimScenario:
    return SimScenario(**kwargs)


# ============================================================================
# COVARIATES
# ============================================================================

def test_cell_prevalences_match_the_design_table():
    prevalences = population_cell_prevalences()
    assert prevalences.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(prevalences, TABLE_PREVALENCE, atol=0.015)


def test_latent_block_of_the_predictive_covariates():
    # X1-X3 are not among the strongly correlated pairs
    block = correlation_matrix(7)[:3, :3]
    np.testing.assert_allclose(block[np.triu_indices(3, 1)], 0.10)
    assert population_cell_prevalences().shape == (8,)


def test_too_few_noise_covariates_is_rejected():
    with pytest.raises(ValueError):
        generate_covariates(10, 3, np.random.default_rng(0))


def test_binary_covariate_rates(large_covariates):
    assert large_covariates["X1"].mean() == pytest.approx(0.20, abs=0.005)
    assert large_covariates["X9"].mean() == pytest.approx(0.30, abs=0.005)
    assert large_covariates["X10"].mean() == pytest.approx(0.60, abs=0.005)
    assert set(np.unique(large_covariates["X1"])) == {0.0, 1.0}


def test_empirical_cells_match_population(large_covariates):
    cells = cell_index(large_covariates)
    empirical = np.bincount(cells, minlength=9)[1:] / cells.size
    np.testing.assert_allclose(empirical, population_cell_prevalences(), atol=0.005)


def test_latent_correlation_structure(large_covariates):
    corr = large_covariates[["X2", "X6", "X3", "X4"]].corr().to_numpy()
    assert corr[0, 1] == pytest.approx(0.30, abs=0.01)
    assert corr[2, 3] == pytest.approx(0.10, abs=0.01)


# ============================================================================
# TRUTH
# ============================================================================

def test_population_ate():
    assert population_ate(_scenario()) == pytest.approx(0.2378, abs=0.01)
    assert population_ate(_scenario(effect_setting=EffectSetting.NULL)) == 0.0


def test_binary_population_ate_is_left_to_the_oracle():
    with pytest.raises(ValueError):
        population_ate(_scenario(outcome_family=OutcomeFamily.BINARY))
    assert population_ate(_scenario(outcome_family=OutcomeFamily.BINARY, effect_setting=EffectSetting.NULL)) == 0.0


def test_single_row_effect():
    row = {"X1": 1.0, "X2": -1.0, "X3": 1.0}
    assert true_effect(row, _scenario()) == pytest.approx(0.40)
    assert true_effect(row, _scenario(outcome_family=OutcomeFamily.BINARY)) == pytest.approx(0.25)
    assert true_effect({"X1": 0.0, "X2": 0.0, "X3": 0.0}, _scenario()) == 0.0


def test_continuous_arm_difference_is_the_cell_effect(large_covariates):
    scenario = _scenario()
    difference = outcome_mean(large_covariates, 1, scenario) - outcome_mean(large_covariates, 0, scenario)
    expected = np.asarray(CELL_EFFECTS[OutcomeFamily.CONTINUOUS])[cell_index(large_covariates) - 1]
    np.testing.assert_allclose(difference, expected)


def test_binary_outcome_mean_is_a_probability(large_covariates):
    mean = outcome_mean(large_covariates, 1, _scenario(outcome_family=OutcomeFamily.BINARY))
    assert np.all((mean > 0) & (mean < 1))


def test_true_partition_and_benefit(large_covariates):
    frame = large_covariates.head(2000)
    partition = true_subgroup_partition(frame, _scenario())
    assert set(partition.tolist()) == {1, 2, 3, 4}
    np.testing.assert_array_equal(true_benefit(frame, _scenario()), partition != 4)

    null = _scenario(effect_setting=EffectSetting.NULL)
    assert np.all(true_subgroup_partition(frame, null) == 1)
    assert np.all(true_benefit(frame, null))


# ============================================================================
# TRIALS
# ============================================================================

def test_trial_has_equal_arms_and_tagged_columns(continuous_trial, continuous_scenario):
    assert continuous_trial.n == continuous_scenario.n
    assert continuous_trial.arm_sizes() == (200, 200)
    assert continuous_trial.p == 12
    binary = [name for name, kind in zip(continuous_trial.covariate_names, continuous_trial.covariate_kinds)
              if kind is CovariateKind.BINARY]
    assert binary == ["X1", "X9", "X10"]


def test_trial_is_reproducible(continuous_scenario):
    assert dataset_hash(generate_trial(continuous_scenario)) == dataset_hash(generate_trial(continuous_scenario))
    other = continuous_scenario.model_copy(update={"seed": 12})
    assert dataset_hash(generate_trial(other)) != dataset_hash(generate_trial(continuous_scenario))


def test_binary_trial_outcomes(binary_trial):
    assert set(np.unique(binary_trial.y)) <= {0.0, 1.0}


@pytest.mark.parametrize("kwargs", [{"n": 401}, {"n_noise": 2}, {"n_noise": 3}])
def test_invalid_scenarios(kwargs):
    with pytest.raises(ValidationError):
        SimScenario(**kwargs)


def test_scenario_label_and_noise():
    scenario = _scenario(n_noise=56)
    assert scenario.canonical
    assert scenario.label() == "continuous/subgroup4/noise56"
    assert scenario.p == 62
    assert "X4" in scenario.noise_covariates and "X5" not in scenario.noise_covariates


def test_write_simulation(tmp_path, continuous_trial, continuous_scenario):
    paths = write_simulation(continuous_trial, continuous_scenario, tmp_path, oracle_ate=0.24)
    sidecar = json.loads(paths["json"].read_text(encoding="utf-8"))
    assert sidecar["scenario"]["seed"] == continuous_scenario.seed
    assert sidecar["dataset_hash"] == dataset_hash(continuous_trial)
    assert sidecar["oracle_ate"] == 0.24
    assert sidecar["predictive"] == ["X1", "X2", "X3"]
    assert dataset_hash(load_csv(paths["csv"], "y", "a")) == dataset_hash(continuous_trial)


# ============================================================================
# ORACLE
# ============================================================================

def test_oracle_overall_effect_is_near_population_ate():
    scenario = _scenario()
    oracle = TruthOracle(scenario, m=50_000, streams=RandomStreams(1))
    assert oracle.effect() == pytest.approx(population_ate(scenario), abs=0.01)


def test_oracle_rule_effects():
    scenario = _scenario()
    oracle = TruthOracle(scenario, m=20_000, streams=RandomStreams(2))
    cell8 = oracle.effect(lambda f: (f["X1"] == 0) & (f["X2"] >= -0.2) & (f["X3"] <= 0.47))
    assert cell8 == pytest.approx(0.0)
    mask = (oracle.frame["X1"] == 1).to_numpy()
    assert oracle.effect_of_mask(mask) == pytest.approx(oracle.effects[mask].mean())


def test_oracle_empty_rule():
    oracle = TruthOracle(_scenario(), m=100, streams=RandomStreams(0))
    with pytest.raises(EmptyOracleCellError):
        oracle.effect(lambda f: f["X2"] > 100)


def test_oracle_function_is_reproducible():
    scenario = _scenario(outcome_family=OutcomeFamily.BINARY)
    first = oracle_true_subgroup_effect(None, scenario, m=5000, streams=RandomStreams(9))
    second = oracle_true_subgroup_effect(None, scenario, m=5000, streams=RandomStreams(9))
    assert first == second
    assert 0.0 < first < 0.25


def test_binary_scenario_ate_comes_from_the_oracle():
    scenario = _scenario(outcome_family=OutcomeFamily.BINARY)
    independent = TruthOracle(scenario, m=50_000, streams=RandomStreams(8)).effect()
    assert scenario_ate(scenario) == pytest.approx(independent, abs=0.01)
    assert scenario_ate(_scenario()) == population_ate(_scenario())


def test_binary_sidecar_reports_oracle_truth(tmp_path, binary_trial, binary_scenario):
    truth = scenario_ate(binary_scenario)
    paths = write_simulation(binary_trial, binary_scenario, tmp_path, oracle_ate=truth)
    sidecar = json.loads(paths["json"].read_text(encoding="utf-8"))
    assert sidecar["population_ate"] is None
    assert sidecar["oracle_ate"] == pytest.approx(TruthOracle(binary_scenario).effect())


def test_oracle_memo_keeps_close_cutpoints_apart():
    oracle = TruthOracle(_scenario(), m=2_000, streams=RandomStreams(4))
    oracle.frame.loc[0, "X2"] = 0.100015
    oracle.effects[0] = 100.0
    below = SubgroupRule(1, (Condition("X2", 1, upper=0.10001),))
    above = SubgroupRule(2, (Condition("X2", 1, upper=0.10002),))
    assert below.text == above.text
    assert oracle.effect(above) > oracle.effect(below) + 0.01
