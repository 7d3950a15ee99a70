"""Plain-text rendering of an AnalysisReport: rule tree and estimates table."""

from typing import List

from shared.models import AnalysisReport, SplitRecord, SubgroupEstimate, TreeNodeRecord


def _num(value, digits: int = 3) -> str:
    return "NA" if value is None else f"{value:.{digits}f}"


def _fmt_cut(value: float) -> str:
    return f"{value:.4g}"


def _side_labels(split: SplitRecord) -> List[str]:
    if split.kind == "binary" or split.cutpoint is None:
        return [f"{split.covariate} = 0", f"{split.covariate} = 1"]
    cut = _fmt_cut(split.cutpoint)
    return [f"{split.covariate} <= {cut}", f"{split.covariate} > {cut}"]


def _arms(estimate: SubgroupEstimate) -> str:
    parts = [f"A={s.arm}: n={s.n} mean={_num(s.mean)}" for s in estimate.arm_summaries]
    return "[" + " | ".join(parts) + "]" if parts else ""


def _probabilities(estimate: SubgroupEstimate, thresholds: List[float]) -> str:
    parts = []
    for c in thresholds:
        below = estimate.probability(c, "<")
        above = estimate.probability(c, ">")
        parts.append(f"P(<{c:g})={_num(below)} P(>{c:g})={_num(above)}")
    return " ".join(parts)


def estimate_line(estimate: SubgroupEstimate, thresholds: List[float]) -> str:
    """n_k, arm summaries, estimate [CI] and probability statements."""
    fields = [f"n={estimate.n_k}", _arms(estimate)]
    if estimate.point is None:
        fields.append(f"estimate unavailable ({estimate.flag})")
    else:
        fields.append(f"est={_num(estimate.point)} [{_num(estimate.ci_low)}, {_num(estimate.ci_high)}]")
        probabilities = _probabilities(estimate, thresholds)
        if probabilities:
            fields.append(probabilities)
        if estimate.flag:
            fields.append(f"({estimate.flag})")
    return "  ".join(f for f in fields if f)


def render_tree_text(report: AnalysisReport) -> str:
    """
    Indented rule tree; terminal lines carry the subgroup estimates.

    A root-only tree renders as a single "Overall" line.
    """
    thresholds = list(report.thresholds)
    header = (
        f"PRISM {report.configuration} | {report.outcome_family} | n={report.n} | "
        f"q={report.q}/{report.p} | K={report.tree.n_subgroups}"
    )
    lines = [header, f"Overall  {estimate_line(report.overall, thresholds)}"]
    root = report.tree.root
    if root.subgroup is not None:
        return "\n".join(lines) + "\n"

    def walk(node: TreeNodeRecord, prefix: str) -> None:
        labels = _side_labels(node.split)
        for i, (child, label) in enumerate(zip(node.children, labels)):
            last = i == len(node.children) - 1
            branch = "`-- " if last else "|-- "
            if child.subgroup is not None:
                estimate = report.subgroup(child.subgroup)
                lines.append(
                    f"{prefix}{branch}{label}  [k={child.subgroup}: {estimate.rule}] {estimate_line(estimate, thresholds)}"
                )
            else:
                lines.append(f"{prefix}{branch}{label}  (n={child.n}, p={_num(child.split.adjusted_p_value, 4)})")
                walk(child, prefix + ("    " if last else "|   "))

    walk(root, "")
    return "\n".join(lines) + "\n"


def render_estimates_table(report: AnalysisReport) -> str:
    """Fixed-width table: the overall row, one row per subgroup, then the benefit group (k = -1) if any."""
    thresholds = list(report.thresholds)
    prob_headers = [f"P(<{c:g})" for c in thresholds] + [f"P(>{c:g})" for c in thresholds]
    header = f"{'k':>3}  {'n':>6}  {'estimate':>9}  {'ci_low':>9}  {'ci_high':>9}  " + "  ".join(
        f"{h:>9}" for h in prob_headers
    ) + "  rule"
    rows = [header, "-" * len(header)]
    estimates = [report.overall] + list(report.subgroups)
    if report.benefit_group is not None:
        estimates.append(report.benefit_group)
    for estimate in estimates:
        probs = [estimate.probability(c, "<") for c in thresholds] + [estimate.probability(c, ">") for c in thresholds]
        rows.append(
            f"{estimate.k:>3}  {estimate.n_k:>6}  {_num(estimate.point, 4):>9}  {_num(estimate.ci_low, 4):>9}  "
            f"{_num(estimate.ci_high, 4):>9}  " + "  ".join(f"{_num(p):>9}" for p in probs) + f"  {estimate.rule}"
        )
    return "\n".join(rows) + "\n"
