"""Bootstrap smoothing: resampling, overlap weighting and summaries."""

import numpy as np
import pytest

from conftest import fast_config
from shared.data import OutcomeFamily
from shared.errors import BootstrapResampleError
from shared.random_streams import RandomStreams
from Stages.Supervisor.pipeline_supervisor import execute_pipeline
from Stages.workers.bootstrap_resampling import BootstrapResult, bootstrap_prism
from Stages.workers.bootstrap_resampling.bootstrap import (
    draw_resample,
    overlap_weighted_estimates,
    percentile_interval,
)


def test_overlap_weighting():
    original = np.array([1, 1, 2, 2, 2])
    resampled = np.array([1, 2, 2, 2, 1])
    theta, counts = overlap_weighted_estimates(original, resampled, {1: 1.0, 2: 3.0}, 2)
    np.testing.assert_allclose(theta, [2.0, 7.0 / 3.0])
    np.testing.assert_array_equal(counts, [[1, 1], [1, 2]])
    assert counts.sum() == original.size


def test_identical_partition_returns_resample_estimates():
    original = np.array([1, 2, 3, 1, 2, 3])
    theta, counts = overlap_weighted_estimates(original, original, {1: 0.1, 2: 0.2, 3: 0.3}, 3)
    np.testing.assert_allclose(theta, [0.1, 0.2, 0.3])
    np.testing.assert_array_equal(counts, np.diag([2, 2, 2]))


def test_percentile_interval_interpolates():
    assert percentile_interval(np.arange(101.0), alpha=0.10) == pytest.approx((5.0, 95.0))
    assert percentile_interval([0.0, 1.0], alpha=0.5) == pytest.approx((0.25, 0.75))


def test_draw_resample_is_deterministic_and_keeps_both_arms():
    a = np.array([1.0, 0.0, 0.0])
    streams = RandomStreams(3)
    for b in range(20):
        rows, attempt = draw_resample(3, a, streams, b, max_retries=50)
        again, _ = draw_resample(3, a, RandomStreams(3), b, max_retries=50)
        np.testing.assert_array_equal(rows, again)
        assert set(a[rows].tolist()) == {0.0, 1.0}
        assert attempt >= 0


def test_single_arm_resamples_give_up():
    with pytest.raises(BootstrapResampleError) as info:
        draw_resample(5, np.zeros(5), RandomStreams(0), 4, max_retries=3)
    assert (info.value.b, info.value.retries) == (4, 3)


def test_result_summary():
    estimates = np.array([[0.1, 0.0, 0.3], [0.2, -0.1, 0.5], [0.3, 0.1, 0.4], [0.4, 0.0, 0.6]])
    result = BootstrapResult(estimates=estimates, redraws=1, resample_subgroups=(2, 1, 3, 2))
    assert result.resamples == 4
    np.testing.assert_allclose(result.smoothed(), [0.25, 0.0, 0.45])
    assert result.probability(2, 0.45, ">") == 0.5
    assert result.probability(1, 0.0, "<") == 0.25

    summary = result.summary(alpha=0.5, thresholds=[0.0], save_vectors=True)
    assert [s.k for s in summary.subgroups] == [0, 1, 2]
    assert summary.subgroups[2].vector == [0.3, 0.5, 0.4, 0.6]
    assert summary.redraws == 1
    assert result.summary(alpha=0.5, thresholds=[0.0]).subgroups[0].vector is None


def test_bootstrap_is_reproducible(x1_effect_trial):
    cfg = fast_config("PRISM_A", seed=7)
    run = execute_pipeline(x1_effect_trial, cfg)
    k = run.tree.n_subgroups
    first = bootstrap_prism(x1_effect_trial, cfg, OutcomeFamily.CONTINUOUS, run.assignment, k, resamples=3)
    second = bootstrap_prism(x1_effect_trial, cfg, OutcomeFamily.CONTINUOUS, run.assignment, k, resamples=3)
    assert first.estimates.shape == (3, k + 1)
    np.testing.assert_array_equal(first.estimates, second.estimates)
    assert np.all(np.isfinite(first.estimates))


def test_pipeline_reports_bootstrap_summary(x1_effect_trial):
    cfg = fast_config("MOB", seed=3, bootstrap={"resamples": 4})
    report = execute_pipeline(x1_effect_trial, cfg).report
    assert report.bootstrap is not None
    assert report.bootstrap.resamples == 4
    assert len(report.bootstrap.subgroups) == report.tree.n_subgroups + 1
    for summary in report.bootstrap.subgroups:
        assert summary.ci_low <= summary.smoothed_estimate <= summary.ci_high


def test_rejects_zero_resamples(x1_effect_trial):
    with pytest.raises(ValueError):
        bootstrap_prism(
            x1_effect_trial, fast_config("MOB"), OutcomeFamily.CONTINUOUS, np.ones(x1_effect_trial.n, dtype=int), 1, 0
        )


@pytest.mark.slow
def test_worker_count_does_not_change_results(x1_effect_trial):
    cfg = fast_config("PRISM_B", seed=11)
    run = execute_pipeline(x1_effect_trial, cfg)
    k = run.tree.n_subgroups
    serial = bootstrap_prism(x1_effect_trial, cfg, OutcomeFamily.CONTINUOUS, run.assignment, k, 4, workers=1)
    parallel = bootstrap_prism(x1_effect_trial, cfg, OutcomeFamily.CONTINUOUS, run.assignment, k, 4, workers=2)
    np.testing.assert_array_equal(serial.estimates, parallel.estimates)
