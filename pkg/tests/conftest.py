"""Shared fixtures for the PRISM test suite."""

import numpy as np
import pytest

from shared.config import EffectSetting, deep_merge, preset_config
from shared.data import CovariateKind, OutcomeFamily, TrialDataset
from simulation import SimScenario, generate_trial

# Small forests / paths keep the default suite fast.
FAST_OVERRIDES = {
    "filter": {"folds": 5, "n_lambda": 30},
    "ple": {"num_trees": 60},
}


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run Monte Carlo suites")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def make_dataset(y, a, x, kinds=None, names=None) -> TrialDataset:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    p = x.shape[1]
    return TrialDataset(
        y=y,
        a=a,
        x=x,
        covariate_kinds=kinds or tuple(CovariateKind.CONTINUOUS for _ in range(p)),
        covariate_names=names or tuple(f"X{j}" for j in range(1, p + 1)),
    )


def fast_config(name: str = "PRISM_A", **overrides):
    return preset_config(name, **deep_merge(FAST_OVERRIDES, overrides))


@pytest.fixture
def continuous_scenario() -> SimScenario:
    return SimScenario(
        outcome_family=OutcomeFamily.CONTINUOUS, effect_setting=EffectSetting.SUBGROUP4, n_noise=6, n=400, seed=11
    )


@pytest.fixture
def continuous_trial(continuous_scenario) -> TrialDataset:
    return generate_trial(continuous_scenario)


@pytest.fixture
def binary_scenario() -> SimScenario:
    return SimScenario(
        outcome_family=OutcomeFamily.BINARY, effect_setting=EffectSetting.SUBGROUP4, n_noise=6, n=400, seed=5
    )


@pytest.fixture
def binary_trial(binary_scenario) -> TrialDataset:
    return generate_trial(binary_scenario)


@pytest.fixture
def x1_effect_trial() -> TrialDataset:
    """Effect 2.0 when X1 = 1, none otherwise; X2 is noise. Noise sd 0.5."""
    rng = np.random.default_rng(3)
    n = 400
    x1 = rng.integers(0, 2, size=n).astype(float)
    x2 = rng.standard_normal(n)
    a = rng.permutation(np.repeat([0.0, 1.0], n // 2))
    y = 1.0 + 2.0 * a * x1 + 0.5 * rng.standard_normal(n)
    return make_dataset(
        y, a, np.column_stack([x1, x2]),
        kinds=(CovariateKind.BINARY, CovariateKind.CONTINUOUS), names=("X1", "X2"),
    )
