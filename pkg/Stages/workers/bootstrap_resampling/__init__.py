"""
Bootstrap Worker - Smoothed Subgroup Estimates

Reruns Steps 1-4 on bootstrap resamples and maps resample subgroups back onto the
original subgroups by overlap weighting.

Responsibilities:
- Seeded resampling with redraws of single-arm resamples
- Overlap-weighted mapping of resample estimates
- Smoothed estimates, percentile intervals and probabilities

Input: TrialDataset + PipelineConfig + original subgroup assignment
Output: BootstrapResult (B x (K + 1) estimate matrix)
"""

from .bootstrap import (
    BootstrapResult,
    bootstrap_prism,
    draw_resample,
    overlap_weighted_estimates,
    percentile_interval,
    run_resample,
)

__all__ = [
    'BootstrapResult',
    'bootstrap_prism',
    'draw_resample',
    'overlap_weighted_estimates',
    'percentile_interval',
    'run_resample',
]
