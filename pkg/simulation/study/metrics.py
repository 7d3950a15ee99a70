"""
Study metrics.

Estimation metrics weight every subgroup by its size: for subgroup estimates
theta_hat_k with truths theta_k and sizes n_k,

    Bias(Overall) = sum n_k (theta_hat_k - theta_k) / sum n_k
    Bias(Abs)     = sum n_k |theta_hat_k - theta_k| / sum n_k
    MSE           = sum n_k (theta_hat_k - theta_k)^2 / sum n_k
    Coverage      = sum n_k 1{theta_k in CI_k} / sum n_k

Per-replicate values are averaged over replicates with Monte Carlo standard errors.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class SubgroupRecord:
    """One estimated subgroup with its oracle truth."""
    k: int
    rule: str
    n_k: int
    estimate: float
    ci_low: Optional[float]
    ci_high: Optional[float]
    truth: float


@dataclass(frozen=True)
class EstimationMetrics:
    bias_overall: float
    bias_abs: float
    mse: float
    coverage: Optional[float]

    def as_dict(self) -> Dict[str, Optional[float]]:
        return {
            "bias_overall": self.bias_overall,
            "bias_abs": self.bias_abs,
            "mse": self.mse,
            "coverage": self.coverage,
        }


def estimation_metrics(records: Sequence[SubgroupRecord]) -> EstimationMetrics:
    """Size-weighted bias, absolute bias, MSE and coverage of one replicate."""
    if not records:
        raise ValueError("no subgroup records")
    n = np.array([r.n_k for r in records], dtype=float)
    err = np.array([r.estimate - r.truth for r in records])
    w = n / n.sum()
    with_ci = [r for r in records if r.ci_low is not None and r.ci_high is not None]
    coverage = None
    if with_ci:
        n_ci = np.array([r.n_k for r in with_ci], dtype=float)
        hit = np.array([r.ci_low <= r.truth <= r.ci_high for r in with_ci], dtype=float)
        coverage = float(n_ci @ hit / n_ci.sum())
    return EstimationMetrics(
        bias_overall=float(w @ err),
        bias_abs=float(w @ np.abs(err)),
        mse=float(w @ err ** 2),
        coverage=coverage,
    )


def bias_mse_coverage(
    records: Mapping[str, Iterable[Sequence[SubgroupRecord]]],
    reference: str = "MOB",
) -> pd.DataFrame:
    """
    Replicate-averaged estimation metrics per method.

    Args:
        records: method -> per-replicate subgroup record lists
        reference: Method for relative efficiency MSE(reference) / MSE(method)

    Returns:
        DataFrame indexed by method with bias_overall, bias_abs, mse, coverage, rel_eff
    """
    rows = []
    for method, replicates in records.items():
        metrics = [estimation_metrics(r).as_dict() for r in replicates if r]
        frame = pd.DataFrame(metrics, dtype=float)
        row = {"method": method, "replicates": len(metrics)}
        for column in ("bias_overall", "bias_abs", "mse", "coverage"):
            row[column] = float(frame[column].mean()) if len(frame) else np.nan
        rows.append(row)
    table = pd.DataFrame(rows).set_index("method")
    if reference in table.index:
        table["rel_eff"] = table.loc[reference, "mse"] / table["mse"]
    else:
        table["rel_eff"] = np.nan
    return table


@dataclass(frozen=True)
class SelectionRates:
    predictive: float
    prognostic: float
    noise: float


def selection_rates(
    split_covariates: Iterable[str],
    predictive: Sequence[str],
    prognostic: Sequence[str],
    noise: Sequence[str],
) -> SelectionRates:
    """Fraction of each covariate group appearing in at least one split."""
    used = set(split_covariates)

    def rate(group: Sequence[str]) -> float:
        return len(used & set(group)) / len(group) if group else 0.0

    return SelectionRates(predictive=rate(predictive), prognostic=rate(prognostic), noise=rate(noise))


def variable_selection_rates(
    splits_by_method: Mapping[str, Iterable[Iterable[str]]],
    predictive: Sequence[str],
    prognostic: Sequence[str],
    noise: Sequence[str],
) -> pd.DataFrame:
    """Replicate-averaged selection rates per method."""
    rows = []
    for method, replicates in splits_by_method.items():
        rates = [selection_rates(s, predictive, prognostic, noise) for s in replicates]
        rows.append({
            "method": method,
            "predictive": float(np.mean([r.predictive for r in rates])) if rates else np.nan,
            "prognostic": float(np.mean([r.prognostic for r in rates])) if rates else np.nan,
            "noise": float(np.mean([r.noise for r in rates])) if rates else np.nan,
        })
    return pd.DataFrame(rows).set_index("method")


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    ppv: Optional[float]
    npv: Optional[float]


def classification_metrics(predicted: np.ndarray, truth_benefit: np.ndarray) -> ClassificationMetrics:
    """
    Accuracy, PPV and NPV of per-patient assignments (True = test drug).

    PPV / NPV are None when nobody is assigned the test drug / the control.
    """
    predicted = np.asarray(predicted, dtype=bool)
    truth = np.asarray(truth_benefit, dtype=bool)
    accuracy = float(np.mean(predicted == truth))
    ppv = float(np.mean(truth[predicted])) if predicted.any() else None
    npv = float(np.mean(~truth[~predicted])) if (~predicted).any() else None
    return ClassificationMetrics(accuracy=accuracy, ppv=ppv, npv=npv)


# ============================================================================
# AGGREGATION
# ============================================================================

GROUP_COLUMNS = ["family", "setting", "n_noise", "method", "metric", "cutoff"]


def aggregate_metrics(rows: List[dict]) -> pd.DataFrame:
    """
    Mean, Monte Carlo SE and counts per (scenario, method, metric, cutoff).

    Rows carry a ``value`` that may be None (undefined ratio); those are excluded
    from the mean and counted in ``n_excluded``.
    """
    if not rows:
        return pd.DataFrame(columns=GROUP_COLUMNS + ["value", "mc_se", "n_replicates", "n_excluded"])
    frame = pd.DataFrame(rows)
    frame["cutoff"] = frame["cutoff"].fillna(-1.0)
    frame["value"] = pd.to_numeric(frame["value"], errors="coerce")
    grouped = frame.groupby(GROUP_COLUMNS, sort=True)["value"]
    table = grouped.agg(
        value="mean",
        sd="std",
        n_replicates="count",
        n_total="size",
    ).reset_index()
    table["mc_se"] = table["sd"].fillna(0.0) / np.sqrt(table["n_replicates"].clip(lower=1))
    table["n_excluded"] = table["n_total"] - table["n_replicates"]
    table["cutoff"] = table["cutoff"].where(table["cutoff"] >= 0)
    return table[GROUP_COLUMNS + ["value", "mc_se", "n_replicates", "n_excluded"]]


def relative_efficiency(table: pd.DataFrame, reference: str = "MOB") -> pd.DataFrame:
    """Rows of MSE(reference) / MSE(method) per scenario, appended as metric ``rel_eff``."""
    mse = table[table["metric"] == "mse"]
    out = []
    for keys, group in mse.groupby(["family", "setting", "n_noise"]):
        ref = group[group["method"] == reference]
        if ref.empty:
            continue
        ref_mse = float(ref["value"].iloc[0])
        for _, row in group.iterrows():
            out.append({
                "family": keys[0], "setting": keys[1], "n_noise": keys[2],
                "method": row["method"], "metric": "rel_eff", "cutoff": np.nan,
                "value": ref_mse / row["value"] if row["value"] > 0 else np.nan,
                "mc_se": np.nan, "n_replicates": row["n_replicates"], "n_excluded": row["n_excluded"],
            })
    if not out:
        return table
    return pd.concat([table, pd.DataFrame(out)], ignore_index=True)
