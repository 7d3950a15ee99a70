"""Counterfactual random forests and patient-level estimates."""

import numpy as np
import pandas as pd
import pytest

from conftest import make_dataset
from shared.config import PleSettings
from shared.data import FilteredView
from shared.errors import InvalidParameterError
from shared.random_streams import RandomStreams
from Stages.workers.ple_forest import PleTable, counterfactual_ple, fit_regression_forest, write_ple_dump
from Stages.workers.ple_forest.forest import default_min_node_size

FAST = PleSettings(num_trees=40)


def test_default_min_node_size():
    assert default_min_node_size(800, 0.10) == 80
    assert default_min_node_size(5, 0.10) == 1
    assert default_min_node_size(101, 0.10) == 11


def test_forest_is_deterministic_across_workers():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((120, 3))
    y = x[:, 0] + rng.standard_normal(120)
    first = fit_regression_forest(x, y, RandomStreams(9).child("f"), num_trees=20, min_node_size=5)
    second = fit_regression_forest(x, y, RandomStreams(9).child("f"), num_trees=20, min_node_size=5, workers=4)
    np.testing.assert_array_equal(first.predict(x), second.predict(x))
    assert first.tree_seeds == second.tree_seeds


def test_leaves_respect_min_node_size():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((150, 2))
    y = x[:, 1] + rng.standard_normal(150)
    forest = fit_regression_forest(x, y, RandomStreams(0), num_trees=10, min_node_size=15)
    assert all(sizes.min() >= 15 for sizes in forest.leaf_sizes())


def test_forest_without_covariates_is_rejected():
    with pytest.raises(InvalidParameterError):
        fit_regression_forest(np.empty((10, 0)), np.zeros(10), RandomStreams(0))


def test_out_of_bag_needs_training_rows():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((40, 2))
    forest = fit_regression_forest(x, x[:, 0], RandomStreams(0), num_trees=5)
    assert forest.predict_oob(x).shape == (40,)
    with pytest.raises(InvalidParameterError):
        forest.predict_oob(x[:10])


def test_empty_view_gives_constant_arm_difference():
    ds = make_dataset([1.0, 3.0, 2.0, 6.0], [0, 0, 1, 1], [[0.1], [0.5], [0.2], [0.9]])
    ple = counterfactual_ple(ds, FilteredView(base=ds, kept_columns=()), RandomStreams(0), FAST)
    np.testing.assert_allclose(ple.mu0_hat, 2.0)
    np.testing.assert_allclose(ple.mu1_hat, 4.0)
    np.testing.assert_allclose(ple.theta_hat, 2.0)
    np.testing.assert_allclose(ple.pi_hat, 0.5)


def test_ple_tracks_a_binary_effect_modifier(x1_effect_trial):
    ds = x1_effect_trial
    ple = counterfactual_ple(ds, FilteredView.all_columns(ds), RandomStreams(4), FAST)
    x1 = ds.x[:, 0] == 1
    assert ple.theta_hat[x1].mean() > 1.5
    assert abs(ple.theta_hat[~x1].mean()) < 0.5
    np.testing.assert_allclose(ple.theta_hat, ple.mu1_hat - ple.mu0_hat)


def test_ple_is_reproducible(continuous_trial):
    fv = FilteredView(base=continuous_trial, kept_columns=(0, 1, 2))
    first = counterfactual_ple(continuous_trial, fv, RandomStreams(5), FAST)
    second = counterfactual_ple(continuous_trial, fv, RandomStreams(5), FAST, workers=3)
    np.testing.assert_array_equal(first.theta_hat, second.theta_hat)


def test_out_of_bag_changes_only_own_arm(x1_effect_trial):
    ds = x1_effect_trial
    fv = FilteredView.all_columns(ds)
    in_bag = counterfactual_ple(ds, fv, RandomStreams(4), FAST)
    oob = counterfactual_ple(ds, fv, RandomStreams(4), PleSettings(num_trees=40, out_of_bag=True))
    control = ds.a == 0
    np.testing.assert_array_equal(in_bag.mu1_hat[control], oob.mu1_hat[control])
    np.testing.assert_array_equal(in_bag.mu0_hat[~control], oob.mu0_hat[~control])


def test_table_take_and_dump(tmp_path):
    ple = PleTable.from_arm_fits(np.array([1.0, 2.0, 3.0]), np.array([2.0, 2.5, 5.0]), np.full(3, 0.5))
    sub = ple.take([2, 0])
    np.testing.assert_array_equal(sub.theta_hat, [2.0, 1.0])
    with pytest.raises(ValueError):
        ple.theta_hat[0] = 0.0

    path = write_ple_dump(ple, tmp_path / "ple.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["patient_id", "mu0_hat", "mu1_hat", "theta_hat"]
    assert frame["patient_id"].tolist() == [1, 2, 3]
