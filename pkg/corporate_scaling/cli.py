"""
Command-line front end: ``corporate-scaling <command> [options]``.

Diagnostics go to stderr as JSON lines; results go to stdout or ``--out``.
Exit status is 0 on success, 2 on validation errors and 1 on I/O failures.
"""

import argparse
import io
import json
import logging
import re
import sys
from pathlib import Path
from typing import Any, Literal
from xml.sax.saxutils import unescape

from pydantic import BaseModel, Field
from pydantic import ValidationError as PydanticValidationError

from .benchmark import (
    best_size_metric_per_group,
    fit_groups,
    fits_by_size_metric,
    group_points,
    rank_size_metrics,
    savings,
    score_companies,
)
from .cache import FitCache
from .config import Settings, load_settings
from .dispersion import country_counts, country_dispersion
from .errors import EmptySample, FitError, GroupNotFitted, InvalidConfig, ScalingError
from .ingest import audit_entries, build_sample, coverage_summary, load_datasets, write_dataset
from .models import (
    AnalysisSample,
    CompanyRecord,
    GroupedFits,
    GroupLevel,
    IMPACT_UNITS,
    ImpactMetric,
    MetricSelector,
    SizeMetric,
)
from .regress import bootstrap_ci
from .report import (
    SIZE_LABELS,
    dumps_stable,
    emit_scatter,
    render_coverage,
    render_dispersion,
    render_fit_summary,
    render_group_table,
    render_intervals,
    render_ranking,
    render_savings,
    render_scatter,
    render_scores,
)
from .synthgen import generate_multigroup, load_specs

logger = logging.getLogger(__name__)

COMMANDS = ("fit", "score", "savings", "rank", "dispersion", "synth", "report", "coverage", "scatter")
CONFIG_PREFIX = "# config: "
SVG_CONFIG_PATTERN = re.compile(r"<dc:description>(.*?)</dc:description>", re.DOTALL)

_RESERVED_LOG_ATTRS = set(vars(logging.LogRecord("", 0, "", 0, "", (), None))) | {"message", "asctime"}


class JsonLinesFormatter(logging.Formatter):
    """One JSON object per record; ``extra`` fields are merged in."""

    def format(self, record: logging.LogRecord) -> str:
        payload: dict[str, Any] = {
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        for key, value in vars(record).items():
            if key not in _RESERVED_LOG_ATTRS and not key.startswith("_"):
                payload[key] = value
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        return json.dumps(payload, default=str, ensure_ascii=False)


def configure_logging(level: str = "INFO", log_file: str | None = None) -> None:
    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(JsonLinesFormatter())
    handlers: list[logging.Handler] = [stream]
    if log_file:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"))
        handlers.append(file_handler)
    logging.basicConfig(level=level.upper(), handlers=handlers, force=True)


class RunConfig(BaseModel):
    """Effective configuration of one run. Echoed into every output for replay."""

    command: Literal["fit", "score", "savings", "rank", "dispersion", "synth", "report", "coverage", "scatter"]
    inputs: list[str] = Field(default_factory=list)
    impact: ImpactMetric = ImpactMetric.Emissions
    size: SizeMetric = SizeMetric.Revenue
    level: GroupLevel = GroupLevel.Sector
    min_group_size: int = Field(default=10, ge=3)
    robust_se: bool = False
    bootstrap: int = Field(default=0, ge=0)
    ci_level: float = Field(default=0.95, gt=0, lt=1)
    seed: int = Field(default=0, ge=0)
    format: Literal["text", "csv", "json", "svg"] = "text"
    out: str | None = None
    fallback: bool = True
    weighted: bool = False
    group: str | None = None
    spec: str | None = None
    workers: int = Field(default=1, ge=1)

    @property
    def selector(self) -> MetricSelector:
        return MetricSelector(size_metric=self.size, impact_metric=self.impact)

    def header(self) -> dict[str, Any]:
        return self.model_dump(mode="json", exclude={"workers"})

    def header_json(self) -> str:
        return json.dumps(self.header(), sort_keys=True, separators=(",", ":"))


def read_config_file(path: str | Path) -> dict[str, Any]:
    """
    Config from a JSON file or from an earlier output: the first ``# config:``
    line of text and CSV, the ``"config"`` key of JSON, or the metadata
    description of an SVG plot.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidConfig(f"config file is not UTF-8 text: {exc.reason}", path=str(path)) from exc
    for line in text.splitlines():
        if line.startswith(CONFIG_PREFIX):
            return json.loads(line[len(CONFIG_PREFIX):])
    if match := SVG_CONFIG_PATTERN.search(text):
        try:
            return json.loads(unescape(match.group(1)))
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"SVG description is not a run config: {exc}", path=str(path)) from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config file is neither JSON nor a run output: {exc}", path=str(path)) from exc
    if isinstance(payload, dict) and isinstance(payload.get("config"), dict):
        return payload["config"]
    return payload


# === pipeline steps ===
def _log_audit(entries: list[dict]) -> None:
    for entry in entries:
        logger.warning("%s: %s", entry["reason"], entry["detail"], extra={k: entry[k] for k in ("row", "company_id", "reason")})


def _load_records(config: RunConfig) -> list[CompanyRecord]:
    if not config.inputs:
        raise InvalidConfig(f"command {config.command!r} needs at least one --input")
    records, row_errors = load_datasets(config.inputs)
    _log_audit(audit_entries([], row_errors))
    return records


def _sample(records: list[CompanyRecord], config: RunConfig, level: GroupLevel | None = None) -> AnalysisSample:
    sample = build_sample(records, config.selector, level or config.level, config.min_group_size)
    _log_audit(audit_entries(sample.dropped))
    return sample


def _overall_fits(records: list[CompanyRecord], config: RunConfig, cache: FitCache, size: SizeMetric | None = None) -> GroupedFits | None:
    """All-companies fit used for the "All" row and the savings fallback."""
    selector = MetricSelector(size_metric=size or config.size, impact_metric=config.impact)
    try:
        sample = build_sample(records, selector, GroupLevel.All, config.min_group_size)
    except EmptySample:
        return None
    return fit_groups(sample, robust_se=config.robust_se, cache=cache)


def _bootstrap_intervals(sample: AnalysisSample, grouped: GroupedFits, config: RunConfig) -> dict:
    intervals = {}
    for key in sorted(grouped.fits):
        try:
            intervals[key] = bootstrap_ci(
                group_points(sample.groups[key]),
                level=config.ci_level,
                replicates=config.bootstrap,
                seed=config.seed,
            )
        except FitError as exc:
            logger.warning("No bootstrap interval for %r: %s", key, exc.message, extra={"code": exc.code})
    return intervals


def _combine(config: RunConfig, parts: list[str]) -> str:
    """Join rendered parts under the config header; JSON parts are merged into one object."""
    if config.format == "json":
        payload: dict[str, Any] = {"config": config.header()}
        for part in parts:
            payload.update(json.loads(part))
        return dumps_stable(payload)
    if config.format == "svg":
        return "".join(parts)
    separator = "\n" if config.format == "text" else ""
    return CONFIG_PREFIX + config.header_json() + "\n" + separator.join(parts)


def _json_section(name: str, rendered: str) -> str:
    return json.dumps({name: json.loads(rendered)})


def _require_format(config: RunConfig, allowed: tuple[str, ...]) -> None:
    if config.format not in allowed:
        raise InvalidConfig(
            f"command {config.command!r} does not support format {config.format!r}",
            format=config.format,
            allowed=list(allowed),
        )


def _cmd_fit(config: RunConfig, cache: FitCache) -> str:
    _require_format(config, ("text", "csv", "json"))
    records = _load_records(config)
    sample = _sample(records, config)
    grouped = fit_groups(sample, robust_se=config.robust_se, workers=config.workers, cache=cache)
    overall = _overall_fits(records, config, cache) if config.level is not GroupLevel.All else None
    parts = [render_group_table({config.size: grouped}, config.format, overall={config.size: overall} if overall else None)]
    if config.bootstrap:
        rendered = render_intervals(_bootstrap_intervals(sample, grouped, config), config.format)
        parts.append(_json_section("intervals", rendered) if config.format == "json" else rendered)
    return _combine(config, parts)


def _cmd_report(config: RunConfig, cache: FitCache) -> str:
    _require_format(config, ("text", "csv", "json"))
    records = _load_records(config)
    fits = fits_by_size_metric(
        records, config.impact, config.level, config.min_group_size, config.robust_se, config.workers, cache
    )
    if not fits:
        raise EmptySample("no size metric yields a fittable sample", impact=config.impact.value)
    overall = None
    if config.level is not GroupLevel.All:
        overall = {size: grouped for size in fits if (grouped := _overall_fits(records, config, cache, size))}
    parts = [render_group_table(fits, config.format, overall=overall)]
    summary = render_fit_summary(fits, config.format)
    if config.format == "json":
        best = best_size_metric_per_group(records, config.impact, config.level, config.min_group_size, cache=cache)
        parts.append(_json_section("summary", summary))
        parts.append(json.dumps({"best_size_metric": {key: metric.value for key, metric in best.items()}}))
    elif config.format == "text":
        parts.append(summary)
    return _combine(config, parts)


def _fitted(records: list[CompanyRecord], config: RunConfig, cache: FitCache) -> tuple[AnalysisSample, GroupedFits]:
    sample = _sample(records, config)
    return sample, fit_groups(sample, robust_se=config.robust_se, workers=config.workers, cache=cache)


def _cmd_score(config: RunConfig, cache: FitCache) -> str:
    _require_format(config, ("text", "csv", "json"))
    sample, grouped = _fitted(_load_records(config), config, cache)
    scores = score_companies(sample, grouped)
    rendered = render_scores(scores, config.format)
    return _combine(config, [_json_section("scores", rendered) if config.format == "json" else rendered])


def _cmd_savings(config: RunConfig, cache: FitCache) -> str:
    _require_format(config, ("text", "csv", "json"))
    records = _load_records(config)
    sample, grouped = _fitted(records, config, cache)
    fallback = None
    if config.fallback and config.level is not GroupLevel.All and grouped.skipped:
        fallback = _overall_fits(records, config, cache)
    report = savings(sample, grouped, fallback=fallback)
    rendered = render_savings(report, config.format)
    return _combine(config, [_json_section("savings", rendered) if config.format == "json" else rendered])


def _cmd_rank(config: RunConfig, cache: FitCache) -> str:
    _require_format(config, ("text", "csv", "json"))
    ranks = rank_size_metrics(
        _load_records(config),
        config.impact,
        config.level,
        config.min_group_size,
        weighted=config.weighted,
        robust_se=config.robust_se,
        workers=config.workers,
        cache=cache,
    )
    return _combine(config, [render_ranking(ranks, config.format)])


def _cmd_dispersion(config: RunConfig, cache: FitCache) -> str:
    _require_format(config, ("text", "csv", "json"))
    records = _load_records(config)
    sample, grouped = _fitted(records, config, cache)
    report = country_dispersion(score_companies(sample, grouped), records)
    parts = [render_dispersion(report, config.format)]
    if config.format == "json":
        included = sample.included_ids()
        counts = country_counts([record for record in records if record.company_id in included])
        parts.append(json.dumps({"country_counts": [[country, n] for country, n in counts]}))
    return _combine(config, parts)


def _cmd_coverage(config: RunConfig, cache: FitCache) -> str:
    _require_format(config, ("text", "csv", "json"))
    summary = coverage_summary(_load_records(config), config.impact)
    return _combine(config, [render_coverage(summary, config.format)])


def _cmd_scatter(config: RunConfig, cache: FitCache) -> str:
    records = _load_records(config)
    sample, grouped = _fitted(records, config, cache)
    group = config.group
    if group is None:
        if len(sample.groups) != 1:
            raise InvalidConfig("--group is required when the sample has several groups", groups=sorted(sample.groups))
        group = next(iter(sample.groups))
    if group not in sample.groups:
        raise GroupNotFitted(f"group {group!r} is not in the sample", group_key=group)
    sector_of = {record.company_id: record.sector or group for record in records}
    bundle = emit_scatter(sample.groups[group], grouped.fits.get(group), group, sector_of)
    rendered = render_scatter(
        bundle,
        config.format,
        size_label=SIZE_LABELS[config.size],
        impact_label=f"{config.impact.value} ({IMPACT_UNITS[config.impact]})",
        description=config.header_json(),
    )
    if config.format == "json":
        rendered = _json_section("scatter", rendered)
    return _combine(config, [rendered])


def _cmd_synth(config: RunConfig, cache: FitCache) -> str:
    if not config.spec:
        raise InvalidConfig("synth needs --spec")
    records = generate_multigroup(load_specs(config.spec))
    buffer = io.StringIO()
    write_dataset(records, buffer)
    return CONFIG_PREFIX + config.header_json() + "\n" + buffer.getvalue()


HANDLERS = {
    "fit": _cmd_fit,
    "score": _cmd_score,
    "savings": _cmd_savings,
    "rank": _cmd_rank,
    "dispersion": _cmd_dispersion,
    "synth": _cmd_synth,
    "report": _cmd_report,
    "coverage": _cmd_coverage,
    "scatter": _cmd_scatter,
}


def _write_output(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def run(config: RunConfig, settings: Settings | None = None) -> int:
    """Execute one command. Returns the process exit status."""
    settings = settings or Settings()
    cache = FitCache(cache_size=settings.fit_cache_size)
    logger.info("Running %s", config.command, extra={"config": config.header()})
    try:
        text = HANDLERS[config.command](config, cache)
        _write_output(text, config.out)
    except ScalingError as exc:
        logger.error(exc.message, extra={"code": exc.code, "details": exc.details})
        return 2
    except OSError as exc:
        logger.error(str(exc), extra={"code": "IOError", "details": {"path": getattr(exc, "filename", None)}})
        return 1
    logger.debug("Fit cache usage", extra={"cache": cache.cache_info()})
    return 0


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", dest="inputs", action="append", default=None, help="Input CSV (repeatable)")
    common.add_argument("--impact", choices=[m.value for m in ImpactMetric], default=None)
    common.add_argument("--size", choices=[m.value for m in SizeMetric], default=None)
    common.add_argument("--level", choices=[m.value for m in GroupLevel], default=None)
    common.add_argument("--min-group", dest="min_group_size", type=int, default=None)
    common.add_argument("--robust-se", action="store_true", default=None, help="HC1 standard errors")
    common.add_argument("--bootstrap", type=int, default=None, help="Bootstrap replicates for beta intervals")
    common.add_argument("--ci-level", type=float, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--format", choices=["text", "csv", "json", "svg"], default=None)
    common.add_argument("--out", default=None, help="Output path (default stdout)")
    common.add_argument("--no-fallback", dest="fallback", action="store_false", default=None)
    common.add_argument("--weighted", action="store_true", default=None)
    common.add_argument("--group", default=None, help="Group key for scatter")
    common.add_argument("--spec", default=None, help="Synthetic spec JSON for synth")
    common.add_argument("--config", dest="config_file", default=None, help="Replay a config header or JSON file")
    common.add_argument("--log-level", default=settings.log_level)
    common.add_argument("--workers", type=int, default=None)

    parser = argparse.ArgumentParser(
        prog="corporate-scaling",
        description="Size-dependent environmental benchmarks from company data.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        subparsers.add_parser(command, parents=[common])
    return parser


def config_from_args(args: argparse.Namespace, settings: Settings) -> RunConfig:
    """Defaults from settings, then the replayed config file, then explicit flags."""
    values: dict[str, Any] = {"min_group_size": settings.min_group_size, "workers": settings.workers}
    if args.config_file:
        values.update(read_config_file(args.config_file))
    values["command"] = args.command
    for field in RunConfig.model_fields:
        flag = getattr(args, field, None)
        if flag is not None:
            values[field] = flag
    try:
        return RunConfig(**values)
    except PydanticValidationError as exc:
        first = exc.errors()[0]
        raise InvalidConfig(f"invalid configuration: {first['msg']}", field=".".join(map(str, first["loc"]))) from exc


def main(argv: list[str] | None = None) -> int:
    try:
        settings = load_settings()
    except PydanticValidationError as exc:
        configure_logging()
        logger.error("invalid environment settings", extra={"code": "InvalidConfig", "details": {"errors": str(exc)}})
        return 2
    args = build_parser(settings).parse_args(argv)
    configure_logging(args.log_level, settings.log_file)
    try:
        config = config_from_args(args, settings)
    except ScalingError as exc:
        logger.error(exc.message, extra={"code": exc.code, "details": exc.details})
        return 2
    except OSError as exc:
        logger.error(str(exc), extra={"code": "IOError", "details": {"path": getattr(exc, "filename", None)}})
        return 1
    return run(config, settings)


if __name__ == "__main__":
    sys.exit(main())
