"""Text and SVG rendering, report.json schema and output files."""

import json
import xml.etree.ElementTree as ET
from pathlib import Path

import pandas as pd
import pytest

from shared.errors import ReportSchemaError
from shared.models import (
    AnalysisReport,
    ArmSummary,
    FilterSummary,
    ProbabilityStatement,
    RunManifest,
    SplitRecord,
    SubgroupEstimate,
    TreeNodeRecord,
    TreeSummary,
)
from report import (
    LinearScale,
    estimate_line,
    render_forest_svg,
    render_posterior_svg,
    render_study_svg,
    render_text,
    render_tree_text,
    render_univariate_svg,
    validate_report_json,
    write_report_outputs,
)
from report.svg_report import LEFT, RIGHT, WIDTH, _padded
from Stages.workers.param_infer import GlmFit, UnivariateRow

FIXTURES = Path(__file__).parent / "fixtures"
SVG = "{http://www.w3.org/2000/svg}"


def _estimate(k, rule, n_k, mean, low, high, below, above, arms=()) -> SubgroupEstimate:
    return SubgroupEstimate(
        k=k, rule=rule, n_k=n_k, estimator="ple", theta_tilde=mean, se=0.1,
        posterior_mean=mean, posterior_var=0.01, ci_low=low, ci_high=high,
        prob_statements=[
            ProbabilityStatement(threshold=0.0, direction=">", probability=above),
            ProbabilityStatement(threshold=0.0, direction="<", probability=below),
        ],
        arm_summaries=list(arms),
    )


def _terminal(node_id, depth, n, rule, k) -> TreeNodeRecord:
    return TreeNodeRecord(node_id=node_id, depth=depth, n=n, rule=rule, subgroup=k)


def _report(root: TreeNodeRecord, subgroups, n_subgroups: int) -> AnalysisReport:
    return AnalysisReport(
        configuration="PRISM_A",
        outcome_family="continuous",
        n=200,
        p=3,
        q=2,
        thresholds=[0.0],
        filter=FilterSummary(enabled=True, family="gaussian", alpha=0.5, chosen_lambda=0.02),
        tree=TreeSummary(source="mob_observed", alpha=0.1, max_depth=4, min_node=20,
                         n_subgroups=n_subgroups, root=root),
        overall=_estimate(
            0, "Overall", 200, 0.5, 0.3, 0.7, 0.001, 0.999,
            arms=[ArmSummary(arm=0, n=100, mean=1.0), ArmSummary(arm=1, n=100, mean=1.5)],
        ),
        subgroups=subgroups,
        manifest=RunManifest(tool_version="1.0.0", seed=2024, config_hash="0" * 64, config={},
                             dataset_hash="f" * 64),
    )


@pytest.fixture
def frozen_report() -> AnalysisReport:
    """Three subgroups: X1 = 0, then X1 = 1 split again on X2 at 0.25."""
    inner = TreeNodeRecord(
        node_id=2, depth=1, n=120, rule="X1 = 1",
        split=SplitRecord(covariate="X2", kind="continuous", cutpoint=0.25, statistic=9.1,
                          p_value=0.016, adjusted_p_value=0.0321),
        children=[
            _terminal(3, 2, 50, "X1 = 1 & X2 <= 0.25", 2),
            _terminal(4, 2, 70, "X1 = 1 & X2 > 0.25", 3),
        ],
    )
    root = TreeNodeRecord(
        node_id=0, depth=0, n=200, rule="Overall",
        split=SplitRecord(covariate="X1", kind="binary", cutpoint=None, statistic=14.2,
                          p_value=0.0005, adjusted_p_value=0.001),
        children=[_terminal(1, 1, 80, "X1 = 0", 1), inner],
    )
    subgroups = [
        _estimate(1, "X1 = 0", 80, 0.1, -0.2, 0.4, 0.25, 0.75),
        _estimate(2, "X1 = 1 & X2 <= 0.25", 50, 0.6, 0.2, 1.0, 0.002, 0.998),
        _estimate(3, "X1 = 1 & X2 > 0.25", 70, 0.9, 0.5, 1.3, 0.0, 1.0),
    ]
    return _report(root, subgroups, 3)


@pytest.fixture
def root_only_report() -> AnalysisReport:
    root = _terminal(0, 0, 200, "Overall", 1)
    return _report(root, [_estimate(1, "Overall", 200, 0.5, 0.3, 0.7, 0.001, 0.999)], 1)


# ============================================================================
# TEXT
# ============================================================================

def test_text_report_matches_golden_file(frozen_report):
    expected = (FIXTURES / "report_golden.txt").read_text(encoding="utf-8")
    assert render_text(frozen_report) == expected


def test_one_terminal_line_per_subgroup(frozen_report):
    lines = render_tree_text(frozen_report).splitlines()
    assert sum("[k=" in line for line in lines) == frozen_report.tree.n_subgroups


def test_root_only_tree_is_a_single_overall_line(root_only_report):
    lines = render_tree_text(root_only_report).splitlines()
    assert len(lines) == 2
    assert lines[1].startswith("Overall  n=200")
    assert not any(line.lstrip().startswith(("|--", "`--")) for line in lines)


def test_unavailable_estimate_line():
    estimate = SubgroupEstimate(k=2, rule="X1 = 1", n_k=12, estimator="glm", flag="single_arm")
    assert estimate_line(estimate, [0.0]) == "n=12  estimate unavailable (single_arm)"


# ============================================================================
# SVG
# ============================================================================

def test_forest_whiskers_map_back_to_intervals(frozen_report):
    root = ET.fromstring(render_forest_svg(frozen_report))
    assert root.tag == f"{SVG}svg"
    whiskers = [e for e in root.iter(f"{SVG}line") if e.get("class") == "whisker"]
    estimates = [frozen_report.overall] + frozen_report.subgroups
    assert len(whiskers) == len(estimates)

    values = [v for e in estimates for v in (e.point, e.ci_low, e.ci_high)]
    lo, hi = _padded(values, include=[0.0])
    scale = LinearScale(lo, hi, LEFT, WIDTH - RIGHT)
    tolerance = 0.005 * (hi - lo)
    for line, estimate in zip(whiskers, estimates):
        assert scale.invert(float(line.get("x1"))) == pytest.approx(estimate.ci_low, abs=tolerance)
        assert scale.invert(float(line.get("x2"))) == pytest.approx(estimate.ci_high, abs=tolerance)


def test_univariate_forest_svg_rows():
    rows = [
        UnivariateRow("X1", 0, 60, 1.0, 1.2, GlmFit(n=60, estimate=0.2, se=0.3, ci_low=-0.4, ci_high=0.8)),
        UnivariateRow("X1", 1, 40, 1.0, 3.0, GlmFit(n=40, estimate=2.0, se=0.4, ci_low=1.2, ci_high=2.8)),
        UnivariateRow("X3", 1, 5, 0.5, None, GlmFit(n=5, estimate=None, se=None, ci_low=None, ci_high=None,
                                                     flag="single_arm")),
    ]
    document = render_univariate_svg(rows)
    root = ET.fromstring(document)
    whiskers = [e for e in root.iter(f"{SVG}line") if e.get("class") == "whisker"]
    assert len(whiskers) == 2
    assert document.count("not estimable (single_arm)") == 1
    assert "X1 = 1 (n=40)" in document

    lo, hi = _padded([-0.4, 0.2, 0.8, 1.2, 2.0, 2.8], include=[0.0])
    scale = LinearScale(lo, hi, LEFT, WIDTH - RIGHT)
    tolerance = 0.005 * (hi - lo)
    for line, row in zip(whiskers, rows):
        assert scale.invert(float(line.get("x1"))) == pytest.approx(row.fit.ci_low, abs=tolerance)
        assert scale.invert(float(line.get("x2"))) == pytest.approx(row.fit.ci_high, abs=tolerance)


def test_linear_scale_round_trips():
    scale = LinearScale(-1.0, 3.0, 300, 720)
    assert scale(-1.0) == 300 and scale(3.0) == 720
    assert scale.invert(scale(0.37)) == pytest.approx(0.37)
    degenerate = LinearScale(2.0, 2.0, 0, 100)
    assert degenerate.domain[0] < 2.0 < degenerate.domain[1]


def test_posterior_svg_has_a_panel_per_estimate(frozen_report):
    root = ET.fromstring(render_posterior_svg(frozen_report))
    curves = [e for e in root.iter(f"{SVG}polyline") if e.get("class") == "density"]
    assert len(curves) == 1 + frozen_report.tree.n_subgroups
    assert "posterior" in root.find(f"{SVG}title").text


def test_empty_study_table_renders_axes_only():
    empty = pd.DataFrame(columns=["family", "setting", "n_noise", "method", "metric", "cutoff",
                                  "value", "mc_se", "n_replicates", "n_excluded"])
    root = ET.fromstring(render_study_svg(empty, "mse"))
    assert root.tag == f"{SVG}svg"
    assert list(root.iter(f"{SVG}circle")) == []


def test_study_chart_plots_each_series():
    rows = [
        {"family": "continuous", "setting": "subgroup4", "n_noise": 6, "method": method, "metric": "accuracy",
         "cutoff": cutoff, "value": value, "mc_se": 0.01, "n_replicates": 10, "n_excluded": 0}
        for method, cutoff, value in (("MOB", 0.5, 0.7), ("MOB", 0.8, 0.6), ("STANDARD", None, 0.5))
    ]
    root = ET.fromstring(render_study_svg(pd.DataFrame(rows), "accuracy"))
    assert len(list(root.iter(f"{SVG}circle"))) == 3


# ============================================================================
# JSON AND FILES
# ============================================================================

def test_report_json_matches_schema(frozen_report):
    validate_report_json(frozen_report.to_json())


def test_schema_rejects_unknown_configuration(frozen_report):
    document = json.loads(frozen_report.to_json())
    document["configuration"] = "PRISM_Z"
    with pytest.raises(ReportSchemaError) as info:
        validate_report_json(document)
    assert info.value.path == "configuration"


def test_outputs_are_byte_identical(tmp_path, frozen_report):
    first = write_report_outputs(frozen_report, tmp_path / "one")
    second = write_report_outputs(frozen_report, tmp_path / "two")
    assert set(first) == {"manifest", "json", "text", "forest", "posterior"}
    for key in first:
        assert first[key].read_bytes() == second[key].read_bytes()
    assert AnalysisReport.model_validate_json(first["json"].read_text(encoding="utf-8")) == frozen_report


def test_unknown_output_format(tmp_path, frozen_report):
    with pytest.raises(ValueError):
        write_report_outputs(frozen_report, tmp_path, formats=["pdf"])
