"""Pipeline supervisor: report assembly and the pooled benefit group."""

from types import SimpleNamespace

import numpy as np
import pytest

from conftest import fast_config
from report import render_text, validate_report_json
from shared.config import ParamMethod
from shared.data import OutcomeFamily
from Stages.Supervisor.pipeline_supervisor import benefit_group, execute_pipeline
from Stages.workers.param_infer import estimate_subgroups
from Stages.workers.ple_forest import PleTable


@pytest.fixture
def x1_products(x1_effect_trial):
    """Stage products built from the true conditional means of the x1 trial."""
    x1 = x1_effect_trial.x[:, 0]
    n = x1.shape[0]
    ple = PleTable.from_arm_fits(np.ones(n), 1.0 + 2.0 * x1, np.full(n, 0.5))
    assignment = x1.astype(int) + 1
    cfg = fast_config(bayes={"thresholds": [1.0]})
    param = estimate_subgroups(
        x1_effect_trial, assignment, ["X1 = 0", "X1 = 1"], OutcomeFamily.CONTINUOUS,
        ParamMethod.PLE, cfg.bayes, ple=ple,
    )
    return SimpleNamespace(ple=ple, assignment=assignment, param=param)


def test_benefit_group_pools_favourable_subgroups(x1_effect_trial, x1_products):
    pooled = benefit_group(x1_effect_trial, fast_config(bayes={"thresholds": [1.0]}), x1_products)
    assert pooled.k == -1
    assert pooled.rule == "Benefit: X1 = 1"
    assert pooled.n_k == int(x1_effect_trial.x[:, 0].sum())
    assert pooled.theta_tilde == pytest.approx(2.0)


def test_benefit_group_follows_benefit_direction(x1_effect_trial, x1_products):
    cfg = fast_config(bayes={"thresholds": [1.0], "benefit_direction": "less"})
    pooled = benefit_group(x1_effect_trial, cfg, x1_products)
    assert pooled.rule == "Benefit: X1 = 0"
    assert pooled.theta_tilde == pytest.approx(0.0)


def test_no_benefit_group_when_every_subgroup_qualifies(x1_effect_trial, x1_products):
    # both posteriors sit above -1
    assert benefit_group(x1_effect_trial, fast_config(bayes={"thresholds": [-1.0]}), x1_products) is None


def test_no_benefit_group_without_patient_level_estimates(x1_effect_trial):
    report = execute_pipeline(x1_effect_trial, fast_config("MOB")).report
    assert report.benefit_group is None
    validate_report_json(report.to_json())


def test_benefit_group_is_listed_in_the_estimates_table(x1_effect_trial, x1_products):
    report = execute_pipeline(x1_effect_trial, fast_config()).report
    pooled = benefit_group(x1_effect_trial, fast_config(bayes={"thresholds": [1.0]}), x1_products)
    with_group = report.model_copy(update={"benefit_group": pooled})
    validate_report_json(with_group.to_json())
    assert "Benefit: X1 = 1" in render_text(with_group)
    assert "Benefit:" not in render_text(report.model_copy(update={"benefit_group": None}))
