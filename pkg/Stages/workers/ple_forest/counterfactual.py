"""
Counterfactual forest: arm-specific forests cross-predicted to every patient.

mu1_hat comes from the forest fit on test-arm rows, mu0_hat from the forest fit on
control rows, both evaluated for ALL patients; theta_hat = mu1_hat - mu0_hat.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from shared.config import PleSettings
from shared.data import FilteredView, TrialDataset
from shared.errors import EmptyArmError
from shared.random_streams import RandomStreams

from .forest import default_min_node_size, fit_regression_forest

logger = logging.getLogger(__name__)


def _readonly(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PleTable:
    """Per-patient arm fits, treatment-difference estimates and propensity."""

    mu0_hat: np.ndarray
    mu1_hat: np.ndarray
    theta_hat: np.ndarray
    pi_hat: np.ndarray

    @classmethod
    def from_arm_fits(cls, mu0_hat: np.ndarray, mu1_hat: np.ndarray, pi_hat: np.ndarray) -> "PleTable":
        mu0 = _readonly(mu0_hat)
        mu1 = _readonly(mu1_hat)
        return cls(mu0_hat=mu0, mu1_hat=mu1, theta_hat=_readonly(mu1 - mu0), pi_hat=_readonly(pi_hat))

    @property
    def n(self) -> int:
        return int(self.theta_hat.shape[0])

    def take(self, rows) -> "PleTable":
        idx = np.asarray(rows, dtype=int)
        return PleTable.from_arm_fits(self.mu0_hat[idx], self.mu1_hat[idx], self.pi_hat[idx])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "patient_id": np.arange(1, self.n + 1),
            "mu0_hat": self.mu0_hat,
            "mu1_hat": self.mu1_hat,
            "theta_hat": self.theta_hat,
        })


def counterfactual_ple(
    ds: TrialDataset,
    fv: FilteredView,
    streams: RandomStreams,
    settings: PleSettings = PleSettings(),
    workers: int = 1,
) -> PleTable:
    """
    Patient-level estimates from arm-specific random forests.

    Args:
        ds: Trial dataset (both arms non-empty)
        fv: Retained covariates; q = 0 yields the constant arm-mean-difference PLE
        streams: Random streams; forests draw from "ple/arm0" and "ple/arm1"
        settings: Forest settings (num_trees, min_node_frac of TOTAL n, mtry, out_of_bag)
        workers: Threads for tree training

    Returns:
        PleTable with pi_hat equal to the marginal treated fraction
    """
    arm1 = ds.a == 1
    arm0 = ds.a == 0
    for arm, mask in ((0, arm0), (1, arm1)):
        if not mask.any():
            raise EmptyArmError(arm)
    pi_hat = np.full(ds.n, arm1.mean())

    if fv.q == 0:
        mu0 = np.full(ds.n, ds.y[arm0].mean())
        mu1 = np.full(ds.n, ds.y[arm1].mean())
        logger.info(f"No covariates retained: constant PLE {mu1[0] - mu0[0]:.4f}")
        return PleTable.from_arm_fits(mu0, mu1, pi_hat)

    x = fv.x
    min_node = default_min_node_size(ds.n, settings.min_node_frac)
    fits = {}
    for arm, mask in ((0, arm0), (1, arm1)):
        fits[arm] = fit_regression_forest(
            x[mask],
            ds.y[mask],
            streams.child("ple", f"arm{arm}"),
            num_trees=settings.num_trees,
            mtry=settings.mtry,
            min_node_size=min_node,
            workers=workers,
        )

    mu = {}
    for arm, mask in ((0, arm0), (1, arm1)):
        predicted = fits[arm].predict(x)
        if settings.out_of_bag:
            predicted[mask] = fits[arm].predict_oob(x[mask])
        mu[arm] = predicted

    ple = PleTable.from_arm_fits(mu[0], mu[1], pi_hat)
    logger.info(
        f"PLE: {settings.num_trees} trees/arm on q={fv.q}, min_node={min_node}; "
        f"theta_hat mean={ple.theta_hat.mean():.4f}, sd={ple.theta_hat.std():.4f}"
    )
    return ple


def write_ple_dump(ple: PleTable, path: Union[str, Path]) -> Path:
    """CSV with patient id, mu0_hat, mu1_hat, theta_hat."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ple.to_frame().to_csv(path, index=False)
    return path
