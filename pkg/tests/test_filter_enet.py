"""Elastic-net filter: coordinate-descent solver, lambda path and screening stage."""

import numpy as np
import pytest
from scipy.linalg import hadamard

from conftest import make_dataset
from shared.config import FilterSettings
from shared.data import OutcomeFamily
from shared.errors import InvalidParameterError
from shared.random_streams import RandomStreams
from Stages.workers.filter_enet import (
    fit_elastic_net,
    filter_report,
    kkt_violation,
    lambda_grid,
    screen_covariates,
    solve_elastic_net,
)
from Stages.workers.filter_enet.elastic_net import Standardization, lambda_max, soft_threshold, solution_path


@pytest.fixture
def regression_data():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((200, 5))
    y = 1.0 + 2.0 * x[:, 0] - 1.0 * x[:, 2] + 0.5 * rng.standard_normal(200)
    return x, y


def test_soft_threshold():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0


def test_standardization_pins_constant_columns():
    x = np.column_stack([np.arange(5.0), np.full(5, 3.0)])
    std = Standardization.fit(x)
    xs = std.transform(x)
    assert std.constant.tolist() == [False, True]
    np.testing.assert_allclose(xs[:, 0].mean(), 0.0, atol=1e-12)
    np.testing.assert_allclose(xs[:, 0].std(), 1.0)
    assert np.all(xs[:, 1] == 0.0)


def test_zero_penalty_matches_least_squares(regression_data):
    x, y = regression_data
    solution = solve_elastic_net(x, y, lam=0.0, alpha=0.5)
    design = np.column_stack([np.ones(len(y)), x])
    ols, *_ = np.linalg.lstsq(design, y, rcond=None)
    np.testing.assert_allclose(solution.intercept, ols[0], atol=1e-8)
    np.testing.assert_allclose(solution.coef, ols[1:], atol=1e-8)


def test_orthonormal_design_has_closed_form():
    x = hadamard(8)[:, 1:4].astype(float)
    y = np.array([3.0, -1.0, 2.0, 0.5, -2.0, 1.5, 0.0, 4.0])
    lam, alpha = 0.4, 0.5
    solution = solve_elastic_net(x, y, lam=lam, alpha=alpha)
    z = x.T @ (y - y.mean()) / len(y)
    expected = [soft_threshold(zj, lam * alpha) / (1.0 + lam * (1.0 - alpha)) for zj in z]
    np.testing.assert_allclose(solution.coef_std, expected, atol=1e-10)


def test_kkt_conditions_hold_along_the_path(regression_data):
    x, y = regression_data
    lambdas = lambda_grid(lambda_max(x, y, 0.5), 20, 1e-3)
    for solution in solution_path(x, y, lambdas, 0.5, OutcomeFamily.CONTINUOUS):
        assert kkt_violation(x, y, solution, 0.5) <= 1e-6


def test_lambda_max_gives_all_zero_solution(regression_data):
    x, y = regression_data
    solution = solve_elastic_net(x, y, lam=lambda_max(x, y, 0.5) * 1.0001, alpha=0.5)
    assert np.all(solution.coef_std == 0.0)


def test_constant_column_never_enters(regression_data):
    x, y = regression_data
    x = np.column_stack([x, np.ones(len(y))])
    solution = solve_elastic_net(x, y, lam=0.01, alpha=0.5)
    assert solution.coef_std[-1] == 0.0
    assert solution.coef[-1] == 0.0


def test_lambda_grid_is_strictly_decreasing():
    grid = lambda_grid(2.0, 50, 1e-3)
    assert len(grid) == 50
    assert grid[0] == pytest.approx(2.0)
    assert grid[-1] == pytest.approx(2e-3)
    assert np.all(np.diff(grid) < 0)
    assert lambda_grid(0.0, 50).tolist() == [0.0]


def test_cross_validation_keeps_strong_predictors(regression_data):
    x, y = regression_data
    fit = fit_elastic_net(x, y, seed=3, folds=5, n_lambda=40)
    assert {0, 2} <= set(fit.selected)
    assert fit.cv_mean[fit.chosen_index] == fit.cv_mean.min()


def test_cross_validation_is_deterministic(regression_data):
    x, y = regression_data
    first = fit_elastic_net(x, y, seed=3, folds=5, n_lambda=30)
    second = fit_elastic_net(x, y, seed=3, folds=5, n_lambda=30, workers=3)
    assert first.chosen_lambda == second.chosen_lambda
    np.testing.assert_array_equal(first.coef, second.coef)


def test_binomial_filter_finds_signal():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((300, 4))
    y = (rng.random(300) < 1.0 / (1.0 + np.exp(-2.0 * x[:, 1]))).astype(float)
    fit = fit_elastic_net(x, y, family=OutcomeFamily.BINARY, seed=1, folds=5, n_lambda=30)
    assert 1 in fit.selected


def test_too_few_rows_for_folds():
    with pytest.raises(InvalidParameterError):
        fit_elastic_net(np.ones((5, 2)), np.arange(5.0), folds=5)


def test_constant_outcome_selects_nothing():
    rng = np.random.default_rng(0)
    fit = fit_elastic_net(rng.standard_normal((50, 3)), np.full(50, 2.0), folds=5)
    assert fit.selected == ()


def test_screen_covariates_returns_view(regression_data):
    x, y = regression_data
    ds = make_dataset(y, np.tile([0.0, 1.0], 100), x)
    view, fit = screen_covariates(ds, RandomStreams(1), FilterSettings(folds=5, n_lambda=30))
    assert view.kept_columns == fit.selected
    report = filter_report(ds, fit)
    assert report.enabled
    assert [c.kept for c in report.covariates] == [j in fit.selected for j in range(ds.p)]


def test_disabled_filter_keeps_everything(regression_data):
    x, y = regression_data
    ds = make_dataset(y, np.tile([0.0, 1.0], 100), x)
    view, fit = screen_covariates(ds, RandomStreams(1), FilterSettings(enabled=False))
    assert fit is None
    assert view.kept_columns == (0, 1, 2, 3, 4)
    assert all(c.kept for c in filter_report(ds, None).covariates)
