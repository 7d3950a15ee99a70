"""
Bootstrap smoothing of subgroup estimates.

Each resample reruns Steps 1-4. The resample's subgroups are mapped back to the
original subgroups by routing the ORIGINAL rows through the resample tree and
weighting every resample subgroup estimate by its overlap count with the original
subgroup. Smoothed estimates, percentile intervals and probabilities come from the
resulting B x (K + 1) matrix (column 0 is the overall estimate).
"""

import logging
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from shared.config import PipelineConfig
from shared.data import OutcomeFamily, TrialDataset
from shared.errors import BootstrapResampleError
from shared.models import BootstrapSubgroupSummary, BootstrapSummary, ProbabilityStatement
from shared.random_streams import RandomStreams
from Stages.Supervisor.stages import StageProducts, fit_stages
from Stages.workers.submod_trees import assign_subgroups

logger = logging.getLogger(__name__)


# ============================================================================
# AGGREGATION HELPERS
# ============================================================================

def overlap_weighted_estimates(
    original: np.ndarray,
    resampled: np.ndarray,
    estimates: Dict[int, float],
    n_subgroups: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Map resample subgroup estimates onto the original subgroups.

    theta_{k,b} = sum_{k_b} n(k & k_b) theta_{k_b} / sum_{k_b} n(k & k_b)

    Args:
        original: Original subgroup (1..K) of every original row
        resampled: Resample subgroup (1..K_b) of every original row
        estimates: Resample estimate per resample subgroup
        n_subgroups: K

    Returns:
        (theta per original subgroup, K x K_b overlap count matrix)
    """
    original = np.asarray(original)
    resampled = np.asarray(resampled)
    labels = sorted(estimates)
    counts = np.zeros((n_subgroups, len(labels)), dtype=int)
    for col, kb in enumerate(labels):
        in_kb = resampled == kb
        for k in range(1, n_subgroups + 1):
            counts[k - 1, col] = int(np.sum(in_kb & (original == k)))
    totals = counts.sum(axis=1)
    expected = np.array([np.sum(original == k) for k in range(1, n_subgroups + 1)])
    assert np.array_equal(totals, expected), "overlap counts must cover every original row"
    values = np.array([estimates[kb] for kb in labels], dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = counts @ values / totals
    return theta, counts


def percentile_interval(values: Sequence[float], alpha: float = 0.05) -> Tuple[float, float]:
    """Linear-interpolation (type 7) percentile interval."""
    low, high = np.quantile(np.asarray(values, dtype=float), [alpha / 2, 1 - alpha / 2], method="linear")
    return float(low), float(high)


# ============================================================================
# RESAMPLING
# ============================================================================

@dataclass(frozen=True)
class ResampleOutcome:
    b: int
    estimates: np.ndarray  # length K + 1; index 0 = overall
    redraws: int
    n_subgroups: int


def draw_resample(n: int, a: np.ndarray, streams: RandomStreams, b: int, max_retries: int) -> Tuple[np.ndarray, int]:
    """n row indices drawn with replacement; single-arm draws are redrawn."""
    for attempt in range(max_retries + 1):
        rows = streams.generator("bootstrap", b, "rows", attempt).integers(0, n, size=n)
        drawn = a[rows]
        if np.any(drawn == 0) and np.any(drawn == 1):
            return rows, attempt
    raise BootstrapResampleError(b, max_retries)


def _resample_point(products: StageProducts, k: int) -> float:
    estimate = products.param.by_k(k)
    if estimate.point is None:
        return float(products.param.overall.point)
    return float(estimate.point)


def run_resample(
    ds: TrialDataset,
    cfg: PipelineConfig,
    family: OutcomeFamily,
    original: np.ndarray,
    n_subgroups: int,
    b: int,
) -> ResampleOutcome:
    """Fit one resample and map its estimates onto the original subgroups."""
    streams = RandomStreams(cfg.seed)
    rows, redraws = draw_resample(ds.n, ds.a, streams, b, cfg.bootstrap.max_retries)
    products = fit_stages(ds.take(rows), cfg, family, streams.child("bootstrap", b), workers=1)

    out = np.empty(n_subgroups + 1)
    out[0] = float(products.param.overall.point)
    if products.tree.n_subgroups == 1:
        out[1:] = out[0]
    else:
        routed = assign_subgroups(products.tree, ds.x)
        estimates = {k: _resample_point(products, k) for k in range(1, products.tree.n_subgroups + 1)}
        out[1:], _ = overlap_weighted_estimates(original, routed, estimates, n_subgroups)
    return ResampleOutcome(b=b, estimates=out, redraws=redraws, n_subgroups=products.tree.n_subgroups)


def _resample_worker(args: tuple) -> ResampleOutcome:
    return run_resample(*args)


@dataclass(frozen=True)
class BootstrapResult:
    """Per-resample estimates for the overall population and each original subgroup."""
    estimates: np.ndarray  # B x (K + 1)
    redraws: int
    resample_subgroups: Tuple[int, ...]

    @property
    def resamples(self) -> int:
        return self.estimates.shape[0]

    def smoothed(self) -> np.ndarray:
        return self.estimates.mean(axis=0)

    def vector(self, k: int) -> np.ndarray:
        return self.estimates[:, k]

    def probability(self, k: int, threshold: float, direction: str = ">") -> float:
        v = self.vector(k)
        return float(np.mean(v > threshold) if direction == ">" else np.mean(v < threshold))

    def summary(self, alpha: float, thresholds: Sequence[float], save_vectors: bool = False) -> BootstrapSummary:
        smoothed = self.smoothed()
        subgroups: List[BootstrapSubgroupSummary] = []
        for k in range(self.estimates.shape[1]):
            low, high = percentile_interval(self.vector(k), alpha)
            subgroups.append(BootstrapSubgroupSummary(
                k=k,
                smoothed_estimate=float(smoothed[k]),
                ci_low=low,
                ci_high=high,
                prob_statements=[
                    ProbabilityStatement(threshold=float(c), direction=d, probability=self.probability(k, c, d))
                    for c in sorted(thresholds) for d in (">", "<")
                ],
                vector=[float(v) for v in self.vector(k)] if save_vectors else None,
            ))
        return BootstrapSummary(resamples=self.resamples, alpha=alpha, redraws=self.redraws, subgroups=subgroups)


def bootstrap_prism(
    ds: TrialDataset,
    cfg: PipelineConfig,
    family: OutcomeFamily,
    original: np.ndarray,
    n_subgroups: int,
    resamples: int,
    workers: int = 1,
) -> BootstrapResult:
    """
    Rerun PRISM on ``resamples`` bootstrap resamples.

    Args:
        ds: Original trial dataset
        cfg: Pipeline configuration (its seed drives every resample stream)
        family: Resolved outcome family
        original: Original subgroup assignment (1..K) per row
        n_subgroups: K
        resamples: B >= 1
        workers: Processes; results do not depend on it

    Returns:
        BootstrapResult
    """
    if resamples < 1:
        raise ValueError(f"resamples must be >= 1, got {resamples}")
    args = [(ds, cfg, family, np.asarray(original), n_subgroups, b) for b in range(resamples)]
    logger.info(f"Bootstrap: {resamples} resamples on {workers} worker(s)")

    if workers > 1:
        ctx = mp.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            outcomes = list(pool.map(_resample_worker, args))
    else:
        outcomes = [_resample_worker(a) for a in args]

    outcomes.sort(key=lambda o: o.b)
    result = BootstrapResult(
        estimates=np.vstack([o.estimates for o in outcomes]),
        redraws=sum(o.redraws for o in outcomes),
        resample_subgroups=tuple(o.n_subgroups for o in outcomes),
    )
    root_only = sum(k == 1 for k in result.resample_subgroups)
    logger.info(
        f"Bootstrap done: {result.redraws} redraw(s), {root_only}/{resamples} root-only resample trees"
    )
    return result
