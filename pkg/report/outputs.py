"""Writes the files of one analysis run into an output directory."""

import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, Union

from jsonschema import Draft202012Validator

from shared.data import CovariateKind, OutcomeFamily
from shared.errors import ReportSchemaError
from shared.models import AnalysisReport
from Stages.Supervisor.pipeline_supervisor import PipelineRun
from Stages.workers.param_infer import univariate_forest
from Stages.workers.ple_forest import write_ple_dump

from .svg_report import render_forest_svg, render_posterior_svg, render_univariate_svg
from .text_report import render_estimates_table, render_tree_text

logger = logging.getLogger(__name__)

FORMATS = ("json", "text", "svg")
SCHEMA_PATH = Path(__file__).resolve().parent.parent / "shared" / "schemas" / "analysis_report.schema.json"


@lru_cache(maxsize=1)
def _report_validator() -> Draft202012Validator:
    schema = json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))
    Draft202012Validator.check_schema(schema)
    return Draft202012Validator(schema)


def validate_report_json(payload: Union[str, Dict[str, Any]]) -> None:
    """
    Check a serialized report against ``analysis_report.schema.json``.

    Raises:
        ReportSchemaError: On the first violation, naming its JSON path
    """
    document = json.loads(payload) if isinstance(payload, str) else payload
    errors = sorted(_report_validator().iter_errors(document), key=lambda e: list(e.path))
    if errors:
        first = errors[0]
        raise ReportSchemaError("/".join(str(p) for p in first.path) or "<root>", first.message)


def render_text(report: AnalysisReport) -> str:
    return render_tree_text(report) + "\n" + render_estimates_table(report)


def write_report_outputs(
    run: Union[PipelineRun, AnalysisReport],
    out_dir: Union[str, Path],
    formats: Iterable[str] = FORMATS,
    ple_dump: bool = False,
) -> Dict[str, Path]:
    """
    Write report.json / report.txt / SVG plots plus manifest.json.

    Args:
        run: Pipeline run (enables the univariate plot and PLE dump) or a bare report
        out_dir: Output directory, created if missing
        formats: Any of json, text, svg
        ple_dump: Also write ple.csv (PipelineRun with a PLE stage only)

    Returns:
        Mapping of output kind to written path
    """
    formats = set(formats)
    unknown = formats - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown output format(s): {sorted(unknown)}")
    report = run.report if isinstance(run, PipelineRun) else run
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    paths: Dict[str, Path] = {}

    def write(key: str, name: str, content: str) -> None:
        path = out_dir / name
        path.write_text(content, encoding="utf-8")
        paths[key] = path

    write("manifest", "manifest.json", report.manifest.model_dump_json(indent=2) + "\n")
    if "json" in formats:
        document = report.to_json()
        validate_report_json(document)
        write("json", "report.json", document + "\n")
    if "text" in formats:
        write("text", "report.txt", render_text(report))
    if "svg" in formats:
        direction = "greater"
        if isinstance(run, PipelineRun):
            direction = run.config.bayes.benefit_direction
        write("forest", "forest.svg", render_forest_svg(report))
        write("posterior", "posterior.svg", render_posterior_svg(report, direction))
        if isinstance(run, PipelineRun) and CovariateKind.BINARY in run.dataset.covariate_kinds:
            rows = univariate_forest(run.dataset, OutcomeFamily(report.outcome_family), run.config.bayes.alpha)
            write("univariate", "univariate.svg", render_univariate_svg(rows))

    if ple_dump and isinstance(run, PipelineRun) and run.ple is not None:
        paths["ple"] = write_ple_dump(run.ple, out_dir / "ple.csv")

    logger.info(f"Wrote {', '.join(sorted(p.name for p in paths.values()))} to {out_dir}")
    return paths


def write_bootstrap_vectors(run: PipelineRun, out_dir: Union[str, Path]) -> Path:
    """Per-resample subgroup estimates as JSON (columns k = 0..K)."""
    if run.bootstrap is None:
        raise ValueError("run has no bootstrap result")
    path = Path(out_dir) / "bootstrap_vectors.json"
    payload = {
        "resamples": run.bootstrap.resamples,
        "estimates": {str(k): run.bootstrap.vector(k).tolist() for k in range(run.tree.n_subgroups + 1)},
    }
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path
