"""
Rendering of fits, scores and summaries as text, CSV, JSON and SVG.

All renderers are pure functions of their inputs: identical results give
identical bytes. JSON numbers carry 17 significant digits.
"""

import csv
import io
import json
import math
from collections.abc import Mapping, Sequence
from enum import Enum
from typing import Any

import matplotlib
from matplotlib.figure import Figure
from pydantic import BaseModel

from .benchmark import mean_fit_quality, predict_benchmark, regime_summary
from .dispersion import country_map_values
from .errors import GroupNotFitted, InvalidConfig, MixedMetrics
from .models import (
    ALL_GROUP_KEY,
    BenchmarkScore,
    ConfidenceInterval,
    CoverageSummary,
    DispersionReport,
    FitResult,
    GroupedFits,
    GroupLevel,
    IMPACT_UNITS,
    SamplePoint,
    ScalingRegime,
    SavingsReport,
    SIZE_METRIC_ORDER,
    SizeMetric,
    SizeMetricRank,
)
from .regress import significance_stars

FORMATS = ("text", "csv", "json", "svg")
FOOTNOTE = "* p<0.05, **p<0.01, ***p<0.001"
INTERCEPT_NOTE = "ln Y0: intercept in natural-log units (not comparable with base-10 constants)"
ON_LINE_TOLERANCE = 1e-9

SIZE_LABELS = {
    SizeMetric.Employees: "Employees",
    SizeMetric.MarketCap: "Market Capitalisation",
    SizeMetric.Assets: "Assets",
    SizeMetric.Revenue: "Total Revenue",
}

SVG_FIGSIZE = (9.6, 7.2)
SVG_DPI = 100
SVG_RC = {"svg.hashsalt": "corporate-scaling", "svg.fonttype": "none"}
LINE_COLOUR = "#d62728"
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8",
)


# === JSON ===
def _encode(value: Any, indent: int, depth: int) -> str:
    if isinstance(value, BaseModel):
        value = value.model_dump(mode="python")
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return _encode(value.value, indent, depth)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g") if math.isfinite(value) else "null"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    pad = "\n" + " " * (indent * (depth + 1))
    end = "\n" + " " * (indent * depth)
    if isinstance(value, Mapping):
        if not value:
            return "{}"
        items = [
            json.dumps(str(key.value if isinstance(key, Enum) else key), ensure_ascii=False)
            + ": "
            + _encode(item, indent, depth + 1)
            for key, item in value.items()
        ]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        return "[" + pad + ("," + pad).join(_encode(item, indent, depth + 1) for item in value) + end + "]"
    raise TypeError(f"cannot encode {type(value).__name__}")


def dumps_stable(value: Any, indent: int = 2) -> str:
    """JSON text with 17-significant-digit floats; non-finite floats become null."""
    return _encode(value, indent, 0) + "\n"


# === generic tables ===
def _text_cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _align(header: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    widths = [len(label) for label in header]
    for row in rows:
        for index, cell in enumerate(row):
            widths[index] = max(widths[index], len(cell))

    def line(cells: Sequence[str]) -> str:
        parts = [cells[0].ljust(widths[0])] + [cell.rjust(widths[i]) for i, cell in enumerate(cells) if i > 0]
        return "  ".join(parts).rstrip()

    return [line(header), "  ".join("-" * width for width in widths)] + [line(row) for row in rows]


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _render_rows(
    title: str,
    columns: Sequence[str],
    rows: Sequence[Mapping[str, Any]],
    fmt: str,
    notes: Sequence[str] = (),
    json_extra: Mapping[str, Any] | None = None,
) -> str:
    if fmt == "text":
        lines = [title, ""] + _align(columns, [[_text_cell(row.get(column)) for column in columns] for row in rows])
        if notes:
            lines += [""] + list(notes)
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        return _csv_text(columns, [[_csv_cell(row.get(column)) for column in columns] for row in rows])
    if fmt == "json":
        payload: dict[str, Any] = {"title": title, "rows": [{column: row.get(column) for column in columns} for row in rows]}
        if json_extra:
            payload.update(json_extra)
        return dumps_stable(payload)
    raise InvalidConfig(f"format {fmt!r} is not supported here", format=fmt)


# === grouped fit tables ===
def format_beta_cell(fit: FitResult) -> str:
    return f"{fit.beta:.3f}{significance_stars(fit.p_beta)}"


def _check_consistent(fits_by_size: Mapping[SizeMetric, GroupedFits], overall: Mapping[SizeMetric, GroupedFits] | None):
    impacts = {grouped.selector.impact_metric for grouped in fits_by_size.values()}
    levels = {grouped.level for grouped in fits_by_size.values()}
    if overall:
        impacts |= {grouped.selector.impact_metric for grouped in overall.values()}
        if any(grouped.level is not GroupLevel.All for grouped in overall.values()):
            raise MixedMetrics("overall fits must be at the all-companies level")
    if len(impacts) > 1 or len(levels) > 1:
        raise MixedMetrics(
            "fits in one table must share impact metric and level",
            impacts=sorted(impact.value for impact in impacts),
            levels=sorted(level.value for level in levels),
        )
    for size_metric, grouped in list(fits_by_size.items()) + list((overall or {}).items()):
        if grouped.selector.size_metric is not size_metric:
            raise MixedMetrics(
                "fits filed under the wrong size metric",
                expected=size_metric.value,
                found=grouped.selector.size_metric.value,
            )


def render_group_table(
    fits_by_size: Mapping[SizeMetric, GroupedFits],
    fmt: str = "text",
    overall: Mapping[SizeMetric, GroupedFits] | None = None,
) -> str:
    """
    One row per group, four cells (n, adj R², beta with stars, ln Y0) per size metric.

    ``overall`` holds all-companies fits appended as a final "All" row. Size
    metric columns follow the order Employees, MarketCap, Assets, Revenue.

    Raises:
        MixedMetrics: the fits do not share one impact metric and level.
    """
    _check_consistent(fits_by_size, overall)
    metrics = [metric for metric in SIZE_METRIC_ORDER if metric in fits_by_size]
    keys = sorted(
        {key for grouped in fits_by_size.values() for key in grouped.fits}
        | {item.group_key for grouped in fits_by_size.values() for item in grouped.skipped}
    )
    row_fits: list[tuple[str, dict[SizeMetric, FitResult | None]]] = [
        (key, {metric: fits_by_size[metric].fits.get(key) for metric in metrics}) for key in keys
    ]
    if overall and ALL_GROUP_KEY not in keys:
        row_fits.append((ALL_GROUP_KEY, {metric: overall[metric].fits.get(ALL_GROUP_KEY) if metric in overall else None for metric in metrics}))

    any_grouped = next(iter(fits_by_size.values()), None)
    impact = any_grouped.selector.impact_metric if any_grouped else None
    level = any_grouped.level if any_grouped else None
    title = (
        f"{impact.value} ({IMPACT_UNITS[impact]}) vs. company size indicator, {level.value} level"
        if impact is not None
        else "impact vs. company size indicator"
    )

    if fmt == "json":
        rows = []
        for key, cells in row_fits:
            rows.append(
                {
                    "group": key,
                    "cells": {
                        metric.value: None if fit is None else {**fit.model_dump(mode="python"), "stars": significance_stars(fit.p_beta)}
                        for metric, fit in cells.items()
                    },
                }
            )
        return dumps_stable(
            {
                "title": title,
                "impact": impact,
                "level": level,
                "size_metrics": metrics,
                "rows": rows,
                "footnote": FOOTNOTE,
                "intercept_unit": "natural log",
            }
        )

    if fmt == "text":
        header = ["group"]
        for metric in metrics:
            label = SIZE_LABELS[metric]
            header += [f"{label} n", f"{label} adj R2", f"{label} beta", f"{label} ln Y0"]
    else:
        header = ["group"]
        for metric in metrics:
            header += [f"{metric.value}_n", f"{metric.value}_adj_r2", f"{metric.value}_beta", f"{metric.value}_intercept_ln"]

    body = []
    for key, cells in row_fits:
        row = [key]
        for metric in metrics:
            fit = cells[metric]
            if fit is None:
                row += ["-", "-", "-", "-"] if fmt == "text" else ["", "", "", ""]
            else:
                row += [str(fit.n), f"{fit.adj_r2:.3f}", format_beta_cell(fit), f"{fit.intercept_ln:.3f}"]
        body.append(row)

    if fmt == "csv":
        return _csv_text(header, body)
    if fmt == "text":
        lines = [title, ""] + _align(header, body) + ["", FOOTNOTE, INTERCEPT_NOTE]
        return "\n".join(lines) + "\n"
    raise InvalidConfig(f"format {fmt!r} is not supported for tables", format=fmt)


def count_significant(
    fits: GroupedFits | Mapping[str, FitResult],
    alphas: Sequence[float] = (0.05, 0.001),
) -> dict[float, int]:
    """Number of groups with p_beta strictly below each alpha, largest alpha first."""
    fit_map = fits.fits if isinstance(fits, GroupedFits) else fits
    return {alpha: sum(1 for fit in fit_map.values() if fit.p_beta < alpha) for alpha in sorted(alphas, reverse=True)}


# === scatter bundles ===
class ScatterPoint(BaseModel):
    company_id: str
    sector: str
    ln_size: float
    ln_impact: float
    residual_ln: float
    flag: str


class LinePoint(BaseModel):
    size: float
    predicted: float
    ln_size: float
    ln_predicted: float


class ScatterBundle(BaseModel):
    group_key: str
    fit: FitResult
    points: list[ScatterPoint]
    line: list[LinePoint]

    def points_csv(self) -> str:
        return _csv_text(
            ["ln_size", "ln_impact", "company_id", "flag"],
            [[format(p.ln_size, ".17g"), format(p.ln_impact, ".17g"), p.company_id, p.flag] for p in self.points],
        )

    def line_csv(self) -> str:
        return _csv_text(
            ["ln_size", "ln_predicted"],
            [[format(p.ln_size, ".17g"), format(p.ln_predicted, ".17g")] for p in self.line],
        )

    def svg(self, title: str = "", size_label: str = "size", impact_label: str = "impact", description: str = "") -> str:
        return render_scatter_svg(self, title or self.group_key, size_label, impact_label, description)


def _flag(residual: float) -> str:
    if residual > ON_LINE_TOLERANCE:
        return "above"
    if residual < -ON_LINE_TOLERANCE:
        return "below"
    return "on-line"


def emit_scatter(
    points: Sequence[SamplePoint],
    fit: FitResult | None,
    group_key: str,
    sector_of: Mapping[str, str] | None = None,
) -> ScatterBundle:
    """
    Plot data for one fitted group: log coordinates, above/below flags and
    the benchmark line evaluated at the smallest and largest size.

    Raises:
        GroupNotFitted: ``fit`` is None.
    """
    if fit is None:
        raise GroupNotFitted(f"group {group_key!r} has no fit", group_key=group_key)
    sector_of = sector_of or {}
    scatter = []
    for point in points:
        predicted = predict_benchmark(fit, point.size)
        residual = math.log(point.impact) - math.log(predicted)
        scatter.append(
            ScatterPoint(
                company_id=point.company_id,
                sector=sector_of.get(point.company_id, group_key),
                ln_size=math.log(point.size),
                ln_impact=math.log(point.impact),
                residual_ln=residual,
                flag=_flag(residual),
            )
        )
    sizes = [point.size for point in points]
    line = []
    for size in (min(sizes), max(sizes)):
        predicted = predict_benchmark(fit, size)
        line.append(LinePoint(size=size, predicted=predicted, ln_size=math.log(size), ln_predicted=math.log(predicted)))
    return ScatterBundle(group_key=group_key, fit=fit, points=scatter, line=line)


def render_scatter_svg(
    bundle: ScatterBundle,
    title: str,
    size_label: str = "size",
    impact_label: str = "impact",
    description: str = "",
) -> str:
    """
    Log-log scatter of one group with its benchmark line in red.

    The canvas is 960x720 at 100 dpi. Sectors take palette colours in sorted
    name order. ``description`` is stored as the SVG metadata description so
    a saved plot can be replayed with ``--config``.
    """
    sectors = sorted({p.sector for p in bundle.points})
    colour = {sector: PALETTE[index % len(PALETTE)] for index, sector in enumerate(sectors)}

    fig = Figure(figsize=SVG_FIGSIZE, dpi=SVG_DPI, layout="tight")
    ax = fig.subplots()
    for sector in sectors:
        members = [p for p in bundle.points if p.sector == sector]
        ax.scatter(
            [math.exp(p.ln_size) for p in members],
            [math.exp(p.ln_impact) for p in members],
            s=24,
            color=colour[sector],
            alpha=0.75,
            label=sector,
            zorder=2,
        )
    ax.plot(
        [p.size for p in bundle.line],
        [p.predicted for p in bundle.line],
        color=LINE_COLOUR,
        linewidth=2,
        label="benchmark",
        zorder=3,
    )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(f"{size_label} (log scale)")
    ax.set_ylabel(f"{impact_label} (log scale)")
    ax.set_title(title)
    fit = bundle.fit
    ax.text(
        0.02,
        0.97,
        f"ln y = {fit.beta:.3f} ln x {'+' if fit.intercept_ln >= 0 else '-'} {abs(fit.intercept_ln):.3f}, "
        f"R2 = {fit.r2:.3f}, n = {fit.n}",
        transform=ax.transAxes,
        va="top",
    )
    ax.legend(loc="lower right")

    metadata: dict[str, str | None] = {"Date": None, "Title": title}
    if description:
        metadata["Description"] = description
    buffer = io.StringIO()
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(buffer, format="svg", metadata=metadata)
    return buffer.getvalue()


# === other reports ===
SCORE_COLUMNS = ["company_id", "group", "size", "actual", "predicted", "residual_ln", "ratio"]


def render_scores(scores: Sequence[BenchmarkScore], fmt: str = "csv") -> str:
    rows = [
        {
            "company_id": score.company_id,
            "group": score.group_key,
            "size": score.size_value,
            "actual": score.actual_impact,
            "predicted": score.predicted_impact,
            "residual_ln": score.residual_ln,
            "ratio": score.ratio,
        }
        for score in scores
    ]
    return _render_rows("Benchmark scores", SCORE_COLUMNS, rows, fmt)


def render_savings(report: SavingsReport, fmt: str = "text") -> str:
    columns = ["group", "n", "total_actual", "total_capped", "savings_fraction", "share_of_savings"]
    rows = [
        {
            "group": item.group_key,
            "n": item.n,
            "total_actual": item.total_actual,
            "total_capped": item.total_capped,
            "savings_fraction": item.savings_fraction,
            "share_of_savings": item.share_of_savings,
        }
        for item in report.per_group
    ]
    rows.append(
        {
            "group": "Total",
            "n": sum(item.n for item in report.per_group),
            "total_actual": report.total_actual,
            "total_capped": report.total_capped,
            "savings_fraction": report.savings_fraction,
            "share_of_savings": 1.0 if report.total_actual > report.total_capped else 0.0,
        }
    )
    unit = IMPACT_UNITS[report.selector.impact_metric]
    title = (
        f"Savings under benchmark cap: {report.selector.impact_metric.value} ({unit}) vs. "
        f"{report.selector.size_metric.value}, {report.level.value} level"
    )
    notes = [f"savings fraction: {report.savings_fraction:.4f}"]
    if report.excluded:
        notes.append(f"excluded (unfitted groups): {', '.join(report.excluded)}")
    if report.fallback_scored:
        notes.append(f"scored against the all-companies fit: {len(report.fallback_scored)} companies")
    if fmt == "json":
        return dumps_stable(report)
    return _render_rows(title, columns, rows, fmt, notes)


def render_ranking(ranks: Sequence[SizeMetricRank], fmt: str = "text") -> str:
    columns = ["rank", "size_metric", "mean_adj_r2", "significant_share", "groups_fitted"]
    rows = [
        {
            "rank": index,
            "size_metric": rank.size_metric,
            "mean_adj_r2": rank.mean_adj_r2,
            "significant_share": rank.significant_share,
            "groups_fitted": rank.groups_fitted,
        }
        for index, rank in enumerate(ranks, start=1)
    ]
    return _render_rows("Size metrics ranked by mean adjusted R2", columns, rows, fmt, ["significant: p < 0.001"])


def render_dispersion(report: DispersionReport, fmt: str = "text") -> str:
    columns = ["country", "n", "mean_residual_ln", "sd_residual_ln", "cv", "beyond_one_sd"]
    rows = [stats.model_dump(mode="python") for stats in report.countries]
    notes = [
        f"pooled residual SD: {report.pooled_sd:.6g}",
        f"countries beyond one SD: {report.n_flagged} of {len(report.countries)}",
    ]
    if report.unknown:
        notes.append(f"unknown country: {', '.join(report.unknown)}")
    extra = {
        "pooled_sd": report.pooled_sd,
        "n_flagged": report.n_flagged,
        "unknown": report.unknown,
        "map_values": [list(pair) for pair in country_map_values(report)],
    }
    return _render_rows("Country dispersion around the benchmark", columns, rows, fmt, notes, extra)


def render_coverage(summary: CoverageSummary, fmt: str = "text") -> str:
    data = summary.model_dump(mode="python")
    impact = data.pop("impact_metric")
    rows = [{"indicator": key, "value": value} for key, value in data.items()]
    title = f"Coverage of the {impact.value} sample ({IMPACT_UNITS[impact]}, EUR)"
    return _render_rows(title, ["indicator", "value"], rows, fmt)


def render_intervals(intervals: Mapping[str, ConfidenceInterval], fmt: str = "text") -> str:
    columns = ["group", "low", "high", "level", "replicates", "seed"]
    rows = [{"group": key, **interval.model_dump(mode="python")} for key, interval in sorted(intervals.items())]
    return _render_rows("Bootstrap confidence intervals for beta", columns, rows, fmt)


def render_scatter(
    bundle: ScatterBundle,
    fmt: str = "csv",
    size_label: str = "size",
    impact_label: str = "impact",
    description: str = "",
) -> str:
    """Points CSV for ``csv``, the full bundle for ``json``, a plot for ``svg``."""
    if fmt == "csv":
        return bundle.points_csv()
    if fmt == "json":
        return dumps_stable(bundle)
    if fmt == "svg":
        return bundle.svg(
            title=f"{bundle.group_key}: {impact_label} vs. {size_label}",
            size_label=size_label,
            impact_label=impact_label,
            description=description,
        )
    start, end = bundle.line
    notes = [
        f"benchmark line: ({start.size:.6g}, {start.predicted:.6g}) to ({end.size:.6g}, {end.predicted:.6g})",
        f"above: {sum(1 for p in bundle.points if p.flag == 'above')}, "
        f"below: {sum(1 for p in bundle.points if p.flag == 'below')}",
    ]
    rows = [point.model_dump(mode="python") for point in bundle.points]
    columns = ["company_id", "sector", "ln_size", "ln_impact", "residual_ln", "flag"]
    return _render_rows(f"Scatter data for {bundle.group_key}", columns, rows, fmt, notes)


def render_fit_summary(fits_by_size: Mapping[SizeMetric, GroupedFits], fmt: str = "text") -> str:
    """Per size metric: mean fit quality, significance counts and regime counts."""

    columns = [
        "size_metric", "groups_fitted", "mean_r2", "mean_adj_r2",
        "p<0.05", "p<0.001", "sublinear", "linear", "superlinear",
    ]
    rows = []
    for metric in SIZE_METRIC_ORDER:
        grouped = fits_by_size.get(metric)
        if grouped is None:
            continue
        quality = mean_fit_quality(grouped)
        significant = count_significant(grouped)
        regimes = regime_summary(grouped)
        rows.append(
            {
                "size_metric": metric,
                "groups_fitted": quality.groups_fitted,
                "mean_r2": quality.mean_r2,
                "mean_adj_r2": quality.mean_adj_r2,
                "p<0.05": significant[0.05],
                "p<0.001": significant[0.001],
                "sublinear": regimes[ScalingRegime.Sublinear],
                "linear": regimes[ScalingRegime.Linear],
                "superlinear": regimes[ScalingRegime.Superlinear],
            }
        )
    return _render_rows("Fit summary by size metric", columns, rows, fmt)
