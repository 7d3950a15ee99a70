"""
Report rendering.

Responsibilities:
- Indented rule tree and fixed-width estimates table (text)
- Forest plots, posterior density strips and study charts (SVG via jinja2 templates)
- Writing report.json / report.txt / *.svg / manifest.json for a run

Input: AnalysisReport or PipelineRun; tidy study tables
Output: Text and SVG documents
"""

from .outputs import render_text, validate_report_json, write_bootstrap_vectors, write_report_outputs
from .svg_report import (
    LinearScale,
    render_forest_svg,
    render_posterior_svg,
    render_study_svg,
    render_univariate_svg,
)
from .text_report import estimate_line, render_estimates_table, render_tree_text

__all__ = [
    'LinearScale',
    'estimate_line',
    'render_estimates_table',
    'render_forest_svg',
    'render_posterior_svg',
    'render_study_svg',
    'render_text',
    'render_tree_text',
    'render_univariate_svg',
    'validate_report_json',
    'write_bootstrap_vectors',
    'write_report_outputs',
]
