"""MOB and CTREE subgroup trees, routing, rule extraction and node tests."""

from itertools import permutations

import numpy as np
import pytest
from scipy import stats

from conftest import make_dataset
from shared.config import SubmodSettings
from shared.data import CovariateKind, FilteredView, OutcomeFamily
from Stages.workers.ple_forest import PleTable
from Stages.workers.submod_trees import (
    assign_subgroups,
    categorical_score_test,
    extract_rules,
    fit_ctree_on_ple,
    fit_mob,
    linear_statistic_test,
    sup_lm_pvalue,
    sup_lm_test,
)


def _ple_from_theta(theta: np.ndarray) -> PleTable:
    n = theta.shape[0]
    return PleTable.from_arm_fits(np.zeros(n), theta, np.full(n, 0.5))


def _check_partition(tree, ds):
    assignment = assign_subgroups(tree, ds.x)
    np.testing.assert_array_equal(assignment, tree.training_assignment())
    np.testing.assert_array_equal(assignment, assign_subgroups(tree, ds.covariate_frame()))
    assert set(assignment.tolist()) == set(range(1, tree.n_subgroups + 1))
    for rule in extract_rules(tree):
        np.testing.assert_array_equal(rule.mask(ds.x), assignment == rule.k)
        np.testing.assert_array_equal(rule.mask(ds.covariate_frame()), assignment == rule.k)


# ============================================================================
# MOB
# ============================================================================

def test_mob_splits_on_the_effect_modifier(x1_effect_trial):
    ds = x1_effect_trial
    tree = fit_mob(ds, FilteredView.all_columns(ds))
    assert tree.source == "mob_observed"
    assert tree.root.split.covariate == "X1"
    assert tree.root.split.cutpoint is None
    assert tree.root.split.adjusted_p_value < 0.10
    _check_partition(tree, ds)


def test_mob_on_simulated_trial_is_a_partition(continuous_trial):
    ds = continuous_trial
    tree = fit_mob(ds, FilteredView.all_columns(ds), SubmodSettings(alpha=0.5, max_depth=3))
    tree.check_structure()
    assert tree.max_depth() <= 3
    min_node = int(np.ceil(0.10 * ds.n))
    assert all(node.rows.size >= min_node for node in tree.terminals)
    _check_partition(tree, ds)


def test_mob_without_covariates_is_root_only(x1_effect_trial):
    ds = x1_effect_trial
    tree = fit_mob(ds, FilteredView(base=ds, kept_columns=()))
    assert tree.n_subgroups == 1
    assert [rule.text for rule in extract_rules(tree)] == ["Overall"]
    assert np.all(assign_subgroups(tree, ds.x) == 1)


def test_mob_depth_zero_is_root_only(x1_effect_trial):
    ds = x1_effect_trial
    tree = fit_mob(ds, FilteredView.all_columns(ds), SubmodSettings(max_depth=0))
    assert tree.n_subgroups == 1


def test_mob_binary_outcome(binary_trial):
    ds = binary_trial
    tree = fit_mob(ds, FilteredView.all_columns(ds), family=OutcomeFamily.BINARY)
    tree.check_structure()
    _check_partition(tree, ds)


def test_mob_is_deterministic_across_workers(continuous_trial):
    ds = continuous_trial
    settings = SubmodSettings(alpha=0.5)
    first = fit_mob(ds, FilteredView.all_columns(ds), settings)
    second = fit_mob(ds, FilteredView.all_columns(ds), settings, workers=4)
    assert first.to_dict() == second.to_dict()


# ============================================================================
# CTREE
# ============================================================================

def test_ctree_separates_binary_levels(x1_effect_trial):
    ds = x1_effect_trial
    theta = 2.0 * ds.x[:, 0]
    tree = fit_ctree_on_ple(_ple_from_theta(theta), ds, FilteredView.all_columns(ds))
    assert tree.source == "ctree_ple"
    assert [rule.text for rule in extract_rules(tree)] == ["X1 = 0", "X1 = 1"]
    _check_partition(tree, ds)


def test_ctree_places_cut_at_the_step(x1_effect_trial):
    ds = x1_effect_trial
    x2 = ds.x[:, 1]
    theta = np.where(x2 > 0.3, 1.0, 0.0)
    tree = fit_ctree_on_ple(_ple_from_theta(theta), ds, FilteredView(base=ds, kept_columns=(1,)))
    assert tree.n_subgroups == 2
    cut = tree.root.split.cutpoint
    assert x2[x2 <= 0.3].max() < cut < x2[x2 > 0.3].min()


def test_ctree_constant_ple_is_root_only(continuous_trial):
    ds = continuous_trial
    tree = fit_ctree_on_ple(_ple_from_theta(np.full(ds.n, 0.7)), ds, FilteredView.all_columns(ds))
    assert tree.n_subgroups == 1


def test_tree_summary_serializes(x1_effect_trial):
    ds = x1_effect_trial
    tree = fit_ctree_on_ple(_ple_from_theta(2.0 * ds.x[:, 0]), ds, FilteredView.all_columns(ds))
    summary = tree.to_dict()
    assert summary["n_subgroups"] == 2
    assert summary["root"]["split"]["covariate"] == "X1"
    assert [child["subgroup"] for child in summary["root"]["children"]] == [1, 2]
    assert tree.split_covariates() == ("X1",)


# ============================================================================
# NODE TESTS
# ============================================================================

def test_sup_lm_pvalue_is_monotone_and_bounded():
    values = [sup_lm_pvalue(s, 2) for s in (0.0, 2.0, 5.0, 10.0, 20.0, 40.0)]
    assert values[0] == 1.0
    assert all(0.0 <= v <= 1.0 for v in values)
    assert all(later <= earlier for earlier, later in zip(values, values[1:]))
    assert sup_lm_pvalue(15.0, 2) >= stats.chi2.sf(15.0, 2)


def test_sup_lm_detects_a_break():
    rng = np.random.default_rng(0)
    n = 300
    z = rng.standard_normal(n)
    y = np.where(z > 0, 1.0, -1.0) + 0.3 * rng.standard_normal(n)
    scores = (y - y.mean()).reshape(-1, 1)
    assert sup_lm_test(scores, z).p_value < 1e-6


def test_degenerate_scores_give_null_result():
    result = sup_lm_test(np.zeros((50, 2)), np.arange(50.0))
    assert (result.statistic, result.p_value) == (0.0, 1.0)
    result = categorical_score_test(np.ones((10, 1)) * np.arange(10).reshape(-1, 1), np.zeros(10))
    assert result.p_value == 1.0


def test_categorical_score_test_degrees_of_freedom():
    rng = np.random.default_rng(1)
    levels = np.repeat([0.0, 1.0], 50)
    scores = np.column_stack([levels - 0.5 + 0.1 * rng.standard_normal(100), rng.standard_normal(100)])
    result = categorical_score_test(scores - scores.mean(axis=0), levels)
    assert result.df == 2
    assert result.p_value < 1e-6


def test_linear_statistic_moments_are_exact():
    g = np.array([0.5, -1.0, 2.0, 0.0, 1.5])
    h = np.array([1.0, 3.0, -2.0, 0.5, 4.0])
    statistics = [linear_statistic_test(g, np.array(p)).statistic for p in permutations(h)]
    assert np.mean(statistics) == pytest.approx(1.0, abs=1e-10)


def test_linear_statistic_with_constant_response():
    result = linear_statistic_test(np.arange(10.0), np.full(10, 3.0))
    assert result.p_value == 1.0


# ============================================================================
# MONTE CARLO
# ============================================================================

@pytest.mark.slow
def test_mob_false_split_rate_under_no_heterogeneity():
    root_only = 0
    for seed in range(60):
        rng = np.random.default_rng(seed)
        n = 300
        x = rng.standard_normal((n, 3))
        a = rng.permutation(np.repeat([0.0, 1.0], n // 2))
        y = 1.0 + 0.5 * a + rng.standard_normal(n)
        ds = make_dataset(y, a, x)
        root_only += fit_mob(ds, FilteredView.all_columns(ds)).n_subgroups == 1
    assert root_only / 60 >= 0.8


@pytest.mark.slow
def test_mob_recovers_binary_modifier_over_seeds():
    found = 0
    for seed in range(40):
        rng = np.random.default_rng(1000 + seed)
        n = 400
        x1 = rng.integers(0, 2, size=n).astype(float)
        x = np.column_stack([x1, rng.standard_normal((n, 4))])
        a = rng.permutation(np.repeat([0.0, 1.0], n // 2))
        y = 0.8 * a * x1 + rng.standard_normal(n)
        kinds = (CovariateKind.BINARY,) + (CovariateKind.CONTINUOUS,) * 4
        ds = make_dataset(y, a, x, kinds=kinds)
        tree = fit_mob(ds, FilteredView.all_columns(ds))
        found += tree.n_subgroups > 1 and tree.root.split.covariate == "X1"
    assert found / 40 >= 0.85
