"""
Synthetic randomized trials with known subgroup structure.

Covariates X1..Xp (p = 6 + n_noise) are latent standard normals with pairwise
correlation 0.10, raised to 0.30 for (X1, X5), (X2, X6) and (X3, X7). X1, X9 and X10
are then dichotomized at the 0.80, 0.70 and 0.40 normal quantiles. X1-X3 are
predictive, X5, X7 and X10 prognostic, everything else is noise.

The treatment effect theta(X) is constant on the eight cells defined by X1,
X2 < -0.20 and X3 > 0.47; cells with equal effects form the true subgroups.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import stats
from scipy.special import expit, logit

from shared.config import EffectSetting
from shared.data import CovariateKind, OutcomeFamily, TrialDataset, dataset_hash, write_csv
from shared.errors import NonPositiveDefiniteError
from shared.random_streams import RandomStreams

logger = logging.getLogger(__name__)

BASE_CORRELATION = 0.10
PAIR_CORRELATION = 0.30
CORRELATED_PAIRS = ((1, 5), (2, 6), (3, 7))
BINARY_QUANTILES = {1: 0.80, 9: 0.70, 10: 0.40}

X2_CUT = -0.20
X3_CUT = 0.47

PREDICTIVE = ("X1", "X2", "X3")
PROGNOSTIC = ("X5", "X7", "X10")

CANONICAL_NOISE = (6, 56)
# X10 (binary, prognostic) must exist
MIN_NOISE = max(BINARY_QUANTILES) - 6
T_DF = 20
NOISE_SD = 0.85

CONTINUOUS_INTERCEPT = 1.5
CONTINUOUS_COEFFICIENTS = {"X1": 0.28, "X2": -0.20, "X3": 0.15, "X5": 0.14, "X7": 0.09, "X10": 0.22}
BINARY_BASE_RATE = 0.30
BINARY_COEFFICIENTS = {"X1": 0.80, "X2": -0.50, "X3": 0.40, "X5": 0.20, "X7": 0.20, "X10": 0.30}

# Cells in table order: (X1, X2 < -0.20, X3 > 0.47)
CELLS = (
    (1, True, True),
    (1, False, True),
    (1, True, False),
    (0, True, True),
    (1, False, False),
    (0, False, True),
    (0, True, False),
    (0, False, False),
)
TABLE_PREVALENCE = (0.02, 0.05, 0.05, 0.10, 0.08, 0.15, 0.25, 0.30)
CELL_EFFECTS = {
    OutcomeFamily.CONTINUOUS: (0.40, 0.40, 0.40, 0.40, 0.33, 0.33, 0.30, 0.0),
    OutcomeFamily.BINARY: (0.25, 0.25, 0.25, 0.25, 0.17, 0.17, 0.11, 0.0),
}
# True subgroup (1..4) of each cell: cells sharing an effect level
CELL_SUBGROUP = (1, 1, 1, 1, 2, 2, 3, 4)
SUBGROUP_LABELS = {
    1: "two or more of X1 = 1, X2 < -0.2, X3 > 0.47",
    2: "X2 >= -0.2 & exactly one of X1 = 1, X3 > 0.47",
    3: "X1 = 0 & X2 < -0.2 & X3 <= 0.47",
    4: "X1 = 0 & X2 >= -0.2 & X3 <= 0.47",
}


class SimScenario(BaseModel):
    """One simulated-trial design."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    outcome_family: OutcomeFamily = Field(OutcomeFamily.CONTINUOUS, description="continuous or binary")
    effect_setting: EffectSetting = Field(EffectSetting.SUBGROUP4, description="null or subgroup4")
    n_noise: int = Field(6, ge=MIN_NOISE, description="Noise covariates (6 or 56 canonical)")
    n: int = Field(800, ge=2, description="Patients (even, 1:1 randomization)")
    seed: int = Field(0, ge=0, description="Base seed")

    @field_validator("n")
    @classmethod
    def _even(cls, v: int) -> int:
        if v % 2:
            raise ValueError(f"n must be even for 1:1 randomization, got {v}")
        return v

    @property
    def canonical(self) -> bool:
        return self.n_noise in CANONICAL_NOISE

    @property
    def p(self) -> int:
        return 6 + self.n_noise

    @property
    def covariate_names(self) -> List[str]:
        return [f"X{j}" for j in range(1, self.p + 1)]

    @property
    def noise_covariates(self) -> List[str]:
        signal = set(PREDICTIVE) | set(PROGNOSTIC)
        return [name for name in self.covariate_names if name not in signal]

    def label(self) -> str:
        return f"{self.outcome_family.value}/{self.effect_setting.value}/noise{self.n_noise}"


# ============================================================================
# COVARIATES
# ============================================================================

def correlation_matrix(p: int) -> np.ndarray:
    corr = np.full((p, p), BASE_CORRELATION)
    for i, j in CORRELATED_PAIRS:
        corr[i - 1, j - 1] = corr[j - 1, i - 1] = PAIR_CORRELATION
    np.fill_diagonal(corr, 1.0)
    return corr


def _cholesky(corr: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError as e:
        raise NonPositiveDefiniteError(f"covariate correlation matrix is not positive definite: {e}") from e


def latent_covariates(n: int, n_noise: int, rng: np.random.Generator) -> np.ndarray:
    """n x (6 + n_noise) correlated standard normals."""
    p = 6 + n_noise
    factor = _cholesky(correlation_matrix(p))
    return rng.standard_normal((n, p)) @ factor.T


def generate_covariates(n: int, n_noise: int, rng: np.random.Generator) -> pd.DataFrame:
    """
    Draw the covariate table.

    Args:
        n: Patients (>= 1)
        n_noise: Noise covariates
        rng: Seeded generator

    Returns:
        DataFrame X1..X(6 + n_noise); X1, X9, X10 are 0/1
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n_noise < MIN_NOISE:
        raise ValueError(f"n_noise must be >= {MIN_NOISE}, got {n_noise}")
    z = latent_covariates(n, n_noise, rng)
    for j, q in BINARY_QUANTILES.items():
        z[:, j - 1] = (z[:, j - 1] > stats.norm.ppf(q)).astype(float)
    return pd.DataFrame(z, columns=[f"X{j}" for j in range(1, z.shape[1] + 1)])


def covariate_kinds(p: int) -> List[CovariateKind]:
    return [
        CovariateKind.BINARY if j in BINARY_QUANTILES else CovariateKind.CONTINUOUS
        for j in range(1, p + 1)
    ]


# ============================================================================
# TRUTH
# ============================================================================

CovariateRows = Union[pd.DataFrame, Mapping[str, float]]


def _columns(x: CovariateRows) -> Dict[str, np.ndarray]:
    if isinstance(x, pd.DataFrame):
        return {name: x[name].to_numpy(dtype=float) for name in x.columns}
    return {name: np.atleast_1d(np.asarray(value, dtype=float)) for name, value in x.items()}


def cell_index(x: CovariateRows) -> np.ndarray:
    """Cell 1..8 (table order) of each row."""
    cols = _columns(x)
    x1 = cols["X1"] == 1
    low2 = cols["X2"] < X2_CUT
    high3 = cols["X3"] > X3_CUT
    index = np.zeros(x1.shape[0], dtype=int)
    for c, (v1, v2, v3) in enumerate(CELLS, start=1):
        index[(x1 == bool(v1)) & (low2 == v2) & (high3 == v3)] = c
    return index


def _theta(x: CovariateRows, scenario: SimScenario) -> np.ndarray:
    cells = cell_index(x)
    if scenario.effect_setting is EffectSetting.NULL:
        return np.zeros(cells.shape[0])
    return np.asarray(CELL_EFFECTS[scenario.outcome_family])[cells - 1]


def true_effect(x: CovariateRows, scenario: SimScenario) -> Union[float, np.ndarray]:
    """theta(X): a float for a single row mapping, an array for a DataFrame."""
    theta = _theta(x, scenario)
    return float(theta[0]) if not isinstance(x, pd.DataFrame) else theta


def _linear_part(cols: Dict[str, np.ndarray], coefficients: Dict[str, float]) -> np.ndarray:
    # continuous covariates are standardized latent normals, so std(X) = X
    return sum(coef * cols[name] for name, coef in coefficients.items())


def outcome_mean(x: CovariateRows, a: Union[int, np.ndarray], scenario: SimScenario) -> np.ndarray:
    """E(Y | X, A = a): the conditional mean (continuous) or response probability (binary)."""
    cols = _columns(x)
    theta = _theta(cols, scenario)
    a = np.asarray(a, dtype=float)
    if scenario.outcome_family is OutcomeFamily.BINARY:
        eta = logit(BINARY_BASE_RATE) + a * theta + _linear_part(cols, BINARY_COEFFICIENTS)
        return expit(eta)
    return CONTINUOUS_INTERCEPT + a * theta + _linear_part(cols, CONTINUOUS_COEFFICIENTS)


def generate_outcome(
    x: CovariateRows,
    a: Union[int, np.ndarray],
    scenario: SimScenario,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw Y given covariates and treatment."""
    mean = outcome_mean(x, a, scenario)
    if scenario.outcome_family is OutcomeFamily.BINARY:
        return (rng.random(mean.shape[0]) < mean).astype(float)
    noise = rng.standard_t(T_DF, size=mean.shape[0]) * NOISE_SD * np.sqrt((T_DF - 2) / T_DF)
    return mean + noise


def true_subgroup_partition(x: CovariateRows, scenario: SimScenario) -> np.ndarray:
    """True subgroup label per row: 1..4 by effect level, all 1 in the null setting."""
    cells = cell_index(x)
    if scenario.effect_setting is EffectSetting.NULL:
        return np.ones(cells.shape[0], dtype=int)
    return np.asarray(CELL_SUBGROUP)[cells - 1]


def true_subgroup_labels(scenario: SimScenario) -> Dict[int, str]:
    if scenario.effect_setting is EffectSetting.NULL:
        return {1: "Overall"}
    return dict(SUBGROUP_LABELS)


def true_benefit(x: CovariateRows, scenario: SimScenario) -> np.ndarray:
    """Whether the test drug is the right choice: theta(X) > 0, or everyone in the null setting."""
    theta = _theta(x, scenario)
    if scenario.effect_setting is EffectSetting.NULL:
        return np.ones(theta.shape[0], dtype=bool)
    return theta > 0


def population_cell_prevalences() -> np.ndarray:
    """Exact cell probabilities from the trivariate normal law of the latent X1-X3."""
    corr = correlation_matrix(max(max(pair) for pair in CORRELATED_PAIRS))[:3, :3]
    h1 = stats.norm.ppf(BINARY_QUANTILES[1])
    prevalences = []
    for v1, low2, high3 in CELLS:
        # orthant P(s1 Z1 < u1, s2 Z2 < u2, s3 Z3 < u3) with sign flips
        signs = np.array([-1.0 if v1 else 1.0, 1.0 if low2 else -1.0, -1.0 if high3 else 1.0])
        upper = np.array([-h1 if v1 else h1, X2_CUT if low2 else -X2_CUT, -X3_CUT if high3 else X3_CUT])
        cov = corr * np.outer(signs, signs)
        prevalences.append(stats.multivariate_normal(mean=np.zeros(3), cov=cov).cdf(upper))
    prevalences = np.asarray(prevalences, dtype=float)
    return prevalences / prevalences.sum()


def population_ate(scenario: SimScenario) -> float:
    """
    Closed-form population ATE: the prevalence-weighted cell effect.

    Only defined for the continuous family. Binary cell effects live on the logit
    scale, so the binary risk-difference truth comes from ``simulation.oracle``.

    Raises:
        ValueError: Binary family with a non-null effect setting
    """
    if scenario.effect_setting is EffectSetting.NULL:
        return 0.0
    if scenario.outcome_family is OutcomeFamily.BINARY:
        raise ValueError("binary effects are on the logit scale; use simulation.oracle.scenario_ate")
    return float(population_cell_prevalences() @ np.asarray(CELL_EFFECTS[scenario.outcome_family]))


# ============================================================================
# TRIALS
# ============================================================================

def generate_trial(scenario: SimScenario, streams: Optional[RandomStreams] = None) -> TrialDataset:
    """
    Simulate one trial with exactly n/2 patients per arm.

    Args:
        scenario: Design and seed
        streams: Random streams; defaults to RandomStreams(scenario.seed)

    Returns:
        TrialDataset with outcome "y" and treatment "a"
    """
    streams = streams or RandomStreams(scenario.seed)
    if not scenario.canonical:
        logger.warning(f"n_noise={scenario.n_noise} is non-canonical (expected one of {CANONICAL_NOISE})")
    x = generate_covariates(scenario.n, scenario.n_noise, streams.generator("sim", "covariates"))
    a = streams.generator("sim", "treatment").permutation(np.repeat([0.0, 1.0], scenario.n // 2))
    y = generate_outcome(x, a, scenario, streams.generator("sim", "outcome"))
    ds = TrialDataset(
        y=y,
        a=a,
        x=x.to_numpy(),
        covariate_kinds=tuple(covariate_kinds(scenario.p)),
        covariate_names=tuple(x.columns),
    )
    logger.debug(f"Simulated {scenario.label()} seed={scenario.seed}: n={ds.n}")
    return ds


def write_simulation(
    ds: TrialDataset,
    scenario: SimScenario,
    out_dir: Union[str, Path],
    oracle_ate: Optional[float] = None,
) -> Dict[str, Path]:
    """Write trial.csv and a trial.json sidecar (scenario, dataset hash, oracle ATE)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = write_csv(ds, out_dir / "trial.csv")
    sidecar = {
        "scenario": scenario.model_dump(mode="json"),
        "canonical": scenario.canonical,
        "dataset_hash": dataset_hash(ds),
        "population_ate": population_ate(scenario) if scenario.outcome_family is OutcomeFamily.CONTINUOUS else None,
        "oracle_ate": oracle_ate,
        "predictive": list(PREDICTIVE),
        "prognostic": list(PROGNOSTIC),
    }
    json_path = out_dir / "trial.json"
    json_path.write_text(json.dumps(sidecar, indent=2), encoding="utf-8")
    logger.info(f"Wrote {csv_path} and {json_path}")
    return {"csv": csv_path, "json": json_path}
