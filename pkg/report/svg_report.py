"""
SVG rendering of reports and study tables.

Coordinates are computed here; the markup lives in jinja2 templates under
``report/templates``. Every document is standalone SVG 1.1.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader
from scipy import stats

from shared.models import AnalysisReport, SubgroupEstimate

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).parent / "templates"

_env = Environment(
    loader=FileSystemLoader(str(TEMPLATES_DIR)),
    autoescape=True,
    trim_blocks=True,
    lstrip_blocks=True,
)

WIDTH = 760
LEFT = 300
RIGHT = 40
TOP = 48
ROW_HEIGHT = 28
AXIS_SPACE = 44

BENEFIT_FILL = "#2e8b57"
SERIES_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]


# ============================================================================
# SCALES
# ============================================================================

class LinearScale:
    """Maps a data interval onto a pixel interval; ``invert`` maps back."""

    def __init__(self, domain_lo: float, domain_hi: float, range_lo: float, range_hi: float):
        if not domain_hi > domain_lo:
            pad = max(abs(domain_lo), 1.0) * 0.5
            domain_lo, domain_hi = domain_lo - pad, domain_lo + pad
        self.domain = (float(domain_lo), float(domain_hi))
        self.range = (float(range_lo), float(range_hi))

    def __call__(self, value: float) -> float:
        d0, d1 = self.domain
        r0, r1 = self.range
        return r0 + (value - d0) * (r1 - r0) / (d1 - d0)

    def invert(self, pixel: float) -> float:
        d0, d1 = self.domain
        r0, r1 = self.range
        return d0 + (pixel - r0) * (d1 - d0) / (r1 - r0)

    def ticks(self, count: int = 5) -> List[Dict[str, object]]:
        values = np.linspace(self.domain[0], self.domain[1], count)
        return [{"pos": round(self(v), 2), "label": f"{v:.3g}"} for v in values]


def _padded(values: Sequence[float], include: Sequence[float] = ()) -> tuple:
    finite = [v for v in list(values) + list(include) if v is not None and np.isfinite(v)]
    if not finite:
        return -1.0, 1.0
    lo, hi = min(finite), max(finite)
    pad = 0.08 * (hi - lo) if hi > lo else 0.5
    return lo - pad, hi + pad


def _px(value: Optional[float], scale: LinearScale) -> Optional[float]:
    return None if value is None else round(scale(value), 2)


# ============================================================================
# FOREST PLOTS
# ============================================================================

@dataclass(frozen=True)
class ForestRow:
    label: str
    estimate: Optional[float]
    low: Optional[float]
    high: Optional[float]
    note: str = ""


def _forest_document(title: str, rows: List[ForestRow], references: Sequence[float], x_label: str) -> str:
    height = TOP + ROW_HEIGHT * max(len(rows), 1) + AXIS_SPACE
    lo, hi = _padded(
        [v for r in rows for v in (r.estimate, r.low, r.high)],
        include=references,
    )
    scale = LinearScale(lo, hi, LEFT, WIDTH - RIGHT)
    axis_y = TOP + ROW_HEIGHT * max(len(rows), 1)
    laid_out = []
    for i, row in enumerate(rows):
        laid_out.append({
            "y": TOP + ROW_HEIGHT * i + ROW_HEIGHT / 2,
            "label": row.label,
            "note": row.note,
            "x": _px(row.estimate, scale),
            "x_low": _px(row.low, scale),
            "x_high": _px(row.high, scale),
        })
    return _env.get_template("forest.svg.j2").render(
        title=title,
        width=WIDTH,
        height=height,
        left=LEFT,
        right=WIDTH - RIGHT,
        top=TOP,
        axis_y=axis_y,
        rows=laid_out,
        references=[{"x": round(scale(c), 2), "label": f"{c:g}"} for c in references],
        ticks=scale.ticks(),
        x_label=x_label,
    )


def _estimate_row(estimate: SubgroupEstimate) -> ForestRow:
    label = "Overall" if estimate.k == 0 else f"[{estimate.k}] {estimate.rule}"
    return ForestRow(
        label=f"{label} (n={estimate.n_k})",
        estimate=estimate.point,
        low=estimate.ci_low,
        high=estimate.ci_high,
        note=estimate.flag or "",
    )


def render_forest_svg(report: AnalysisReport) -> str:
    """Forest plot: one whisker row for the overall estimate and one per subgroup."""
    rows = [_estimate_row(report.overall)] + [_estimate_row(e) for e in report.subgroups]
    references = sorted(set([0.0] + list(report.thresholds)))
    return _forest_document(
        title=f"{report.configuration}: treatment effect by subgroup",
        rows=rows,
        references=references,
        x_label="Treatment effect (test - control)",
    )


def render_univariate_svg(rows: Sequence, title: str = "Treatment effect by covariate level") -> str:
    """Forest plot of ``univariate_forest`` rows (observed effect within each binary covariate level)."""
    forest_rows = [
        ForestRow(
            label=f"{row.covariate} = {row.level} (n={row.n})",
            estimate=row.fit.estimate,
            low=row.fit.ci_low,
            high=row.fit.ci_high,
            note=row.fit.flag or "",
        )
        for row in rows
    ]
    return _forest_document(title=title, rows=forest_rows, references=[0.0], x_label="Observed treatment effect")


# ============================================================================
# POSTERIOR STRIPS
# ============================================================================

PANEL_HEIGHT = 70
CURVE_POINTS = 121


def render_posterior_svg(report: AnalysisReport, direction: str = "greater") -> str:
    """
    Posterior density strip per estimate, shaded over the benefit region of each threshold.

    Args:
        report: Analysis report
        direction: "greater" shades theta > c, "less" shades theta < c
    """
    estimates = [e for e in [report.overall] + list(report.subgroups)
                 if e.posterior_mean is not None and e.posterior_var is not None and e.posterior_var > 0]
    thresholds = list(report.thresholds)
    if estimates:
        spans = [(e.posterior_mean - 4 * np.sqrt(e.posterior_var), e.posterior_mean + 4 * np.sqrt(e.posterior_var))
                 for e in estimates]
        lo, hi = _padded([s for span in spans for s in span], include=thresholds)
    else:
        lo, hi = _padded([], include=thresholds)
    scale = LinearScale(lo, hi, LEFT, WIDTH - RIGHT)
    grid = np.linspace(lo, hi, CURVE_POINTS)

    panels = []
    for i, estimate in enumerate(estimates):
        sd = float(np.sqrt(estimate.posterior_var))
        density = stats.norm.pdf(grid, loc=estimate.posterior_mean, scale=sd)
        baseline = TOP + PANEL_HEIGHT * (i + 1) - 8
        y_scale = LinearScale(0.0, float(density.max()), baseline, baseline - PANEL_HEIGHT + 18)
        curve = " ".join(f"{scale(g):.2f},{y_scale(d):.2f}" for g, d in zip(grid, density))
        shades = []
        for c in thresholds:
            side = grid >= c if direction == "greater" else grid <= c
            if not side.any():
                continue
            xs, ds = grid[side], density[side]
            points = [f"{scale(xs[0]):.2f},{baseline:.2f}"]
            points += [f"{scale(g):.2f},{y_scale(d):.2f}" for g, d in zip(xs, ds)]
            points.append(f"{scale(xs[-1]):.2f},{baseline:.2f}")
            sign = ">" if direction == "greater" else "<"
            probability = estimate.probability(c, sign)
            shades.append({
                "points": " ".join(points),
                "label": f"P({sign}{c:g})={probability:.3f}" if probability is not None else "",
            })
        label = "Overall" if estimate.k == 0 else f"[{estimate.k}] {estimate.rule}"
        panels.append({
            "label": label,
            "baseline": round(baseline, 2),
            "label_y": round(baseline - PANEL_HEIGHT / 2 + 8, 2),
            "curve": curve,
            "shades": shades,
        })

    height = TOP + PANEL_HEIGHT * max(len(panels), 1) + AXIS_SPACE
    return _env.get_template("posterior.svg.j2").render(
        title=f"{report.configuration}: posterior distributions",
        width=WIDTH,
        height=height,
        left=LEFT,
        right=WIDTH - RIGHT,
        top=TOP,
        axis_y=TOP + PANEL_HEIGHT * max(len(panels), 1),
        panels=panels,
        references=[{"x": round(scale(c), 2), "label": f"{c:g}"} for c in thresholds],
        ticks=scale.ticks(),
        fill=BENEFIT_FILL,
    )


# ============================================================================
# STUDY CHARTS
# ============================================================================

STUDY_HEIGHT = 420
STUDY_LEFT = 70
STUDY_BOTTOM = 90
LEGEND_WIDTH = 190


def _scenario_label(row) -> str:
    return f"{row['family'][:3]}/{row['setting']}/{int(row['n_noise'])}"


def _series_label(row) -> str:
    cutoff = row.get("cutoff")
    if cutoff is None or pd.isna(cutoff):
        return str(row["method"])
    return f"{row['method']} ({cutoff:g})"


def render_study_svg(tidy: pd.DataFrame, metric: str) -> str:
    """
    Point chart of one metric: scenarios along x, one series per method (and cutoff),
    whiskers at +/- 2 Monte Carlo SE. An empty table renders axes only.
    """
    subset = tidy[tidy["metric"] == metric] if not tidy.empty else tidy
    plot_right = WIDTH - LEGEND_WIDTH
    axis_y = STUDY_HEIGHT - STUDY_BOTTOM

    records = subset.to_dict(orient="records") if not subset.empty else []
    scenarios: List[str] = []
    series: List[str] = []
    for row in records:
        for bucket, value in ((scenarios, _scenario_label(row)), (series, _series_label(row))):
            if value not in bucket:
                bucket.append(value)

    extents = []
    for r in records:
        if pd.isna(r["value"]):
            continue
        spread = 2 * r["mc_se"] if pd.notna(r["mc_se"]) else 0.0
        extents += [r["value"] - spread, r["value"] + spread]
    lo, hi = _padded(extents)
    y_scale = LinearScale(lo, hi, axis_y, TOP)
    slot = (plot_right - STUDY_LEFT) / max(len(scenarios), 1)
    offset = slot * 0.6 / max(len(series), 1)

    points = []
    for row in records:
        if pd.isna(row["value"]):
            continue
        s = series.index(_series_label(row))
        x = STUDY_LEFT + slot * scenarios.index(_scenario_label(row)) + slot * 0.2 + offset * (s + 0.5)
        se = row["mc_se"] if pd.notna(row["mc_se"]) else 0.0
        points.append({
            "x": round(x, 2),
            "y": round(y_scale(row["value"]), 2),
            "y_low": round(y_scale(row["value"] - 2 * se), 2),
            "y_high": round(y_scale(row["value"] + 2 * se), 2),
            "color": SERIES_COLORS[s % len(SERIES_COLORS)],
        })
    if not records:
        logger.debug(f"Study chart for {metric}: no rows, rendering axes only")

    return _env.get_template("study.svg.j2").render(
        title=f"Simulation study: {metric}",
        width=WIDTH,
        height=STUDY_HEIGHT,
        left=STUDY_LEFT,
        right=plot_right,
        top=TOP,
        axis_y=axis_y,
        ticks=[{"pos": round(y_scale(v), 2), "label": f"{v:.3g}"} for v in np.linspace(lo, hi, 5)],
        scenarios=[
            {"x": round(STUDY_LEFT + slot * (i + 0.5), 2), "label": label} for i, label in enumerate(scenarios)
        ],
        legend=[
            {"y": TOP + 16 * i, "label": label, "color": SERIES_COLORS[i % len(SERIES_COLORS)]}
            for i, label in enumerate(series)
        ],
        points=points,
        metric=metric,
    )
