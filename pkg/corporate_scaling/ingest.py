"""
Reading, validating, filtering and grouping company observations.

Input is comma-delimited UTF-8 text with a header row. Rows are split with the
csv module, checked against the header's field count, and held as a polars
frame of text columns. Cells are validated here, so number parsing never
depends on locale: only a dot is accepted as decimal separator and an empty
cell means missing.
"""

import csv
import io
import logging
import math
import re
from collections import defaultdict
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import BinaryIO, TextIO

import polars as pl
from pydantic import BaseModel

from .errors import EmptySample, InvalidConfig, MalformedDataset, MissingHeader
from .models import (
    ALL_GROUP_KEY,
    AnalysisSample,
    CompanyRecord,
    CoverageSummary,
    DroppedRecord,
    DropReason,
    GroupLevel,
    ImpactMetric,
    MetricSelector,
    RowError,
    RowErrorReason,
    SamplePoint,
    SIZE_FIELDS,
)

logger = logging.getLogger(__name__)

_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_COUNTRY = re.compile(r"[A-Z]{2}")

NUMERIC_FIELDS = (
    "employees", "market_cap", "assets", "revenue", "co2e", "energy", "water", "waste",
)


class ColumnSchema(BaseModel):
    """Maps logical record fields to column names. ``None`` marks an absent column."""

    company_id: str = "company_id"
    name: str | None = "name"
    country: str | None = "country"
    sector: str | None = "sector"
    industry: str | None = "industry"
    employees: str | None = "employees"
    market_cap: str | None = "market_cap_eur"
    assets: str | None = "assets_eur"
    revenue: str | None = "revenue_eur"
    co2e: str | None = "co2e_tonnes"
    energy: str | None = "energy_gj"
    water: str | None = "water_m3"
    waste: str | None = "waste_tonnes"

    def columns(self) -> dict[str, str]:
        return {field: column for field, column in self.model_dump().items() if column is not None}


DEFAULT_SCHEMA = ColumnSchema()


class _RowRejected(Exception):
    def __init__(self, reason: RowErrorReason, message: str):
        super().__init__(message)
        self.reason = reason
        self.message = message


def _read_bytes(source: bytes | str | Path | BinaryIO) -> bytes:
    if isinstance(source, bytes):
        return source
    if isinstance(source, (str, Path)):
        return Path(source).read_bytes()
    return source.read()


def _parse_number(field: str, text: str) -> float | None:
    text = text.strip()
    if text == "":
        return None
    if not _NUMBER.fullmatch(text):
        raise _RowRejected(RowErrorReason.MalformedNumber, f"{field}: {text!r} is not a number")
    value = float(text)
    if not math.isfinite(value):
        raise _RowRejected(RowErrorReason.MalformedNumber, f"{field}: {text!r} overflows")
    if value < 0:
        raise _RowRejected(RowErrorReason.NonPositiveValue, f"{field}: {text} is negative")
    return value


def _parse_row(row_number: int, row: dict[str, str | None], columns: dict[str, str]) -> CompanyRecord:
    def cell(field: str) -> str:
        column = columns.get(field)
        value = row.get(column) if column else None
        return value if value is not None else ""

    company_id = cell("company_id").strip()
    if not company_id:
        raise _RowRejected(RowErrorReason.MissingId, "company_id is empty")
    country = cell("country").strip().upper()
    if country and not _COUNTRY.fullmatch(country):
        raise _RowRejected(RowErrorReason.InvalidCountry, f"country {country!r} is not ISO-3166 alpha-2")
    values = {field: _parse_number(field, cell(field)) for field in NUMERIC_FIELDS if field in columns}
    return CompanyRecord(
        company_id=company_id,
        name=cell("name").strip(),
        source_row=row_number,
        country=country,
        sector=cell("sector").strip(),
        industry=cell("industry").strip(),
        **values,
    )


def _split_rows(data: bytes, source_name: str) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Header and numbered data rows. Comment and blank lines are skipped and not numbered."""
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise MalformedDataset(f"input is not UTF-8: {exc.reason}", source=source_name) from exc
    lines = (line for line in io.StringIO(text, newline="") if not line.startswith("#"))
    try:
        rows = [row for row in csv.reader(lines) if row]
    except csv.Error as exc:
        raise MalformedDataset(f"cannot read delimited input: {exc}", source=source_name) from exc
    if not rows:
        raise MissingHeader("input has no header row", source=source_name)
    header = rows[0]
    if len(set(header)) != len(header):
        raise MalformedDataset("header repeats a column name", header=header, source=source_name)
    return header, list(enumerate(rows[1:], start=1))


def parse_dataset(
    source: bytes | str | Path | BinaryIO,
    schema: ColumnSchema = DEFAULT_SCHEMA,
    source_name: str = "",
) -> tuple[list[CompanyRecord], list[RowError]]:
    """
    Parse delimited company data into records and per-row errors.

    Every data row (numbered from 1, header excluded) yields exactly one
    CompanyRecord or one RowError; a row whose field count differs from the
    header's is a RowError too. Lines starting with ``#`` are comments.

    Raises:
        MissingHeader: the header is absent or lacks a column named by ``schema``.
        MalformedDataset: the input is not UTF-8 text or its header repeats a name.
    """
    header, rows = _split_rows(_read_bytes(source), source_name)
    columns = schema.columns()
    for field, column in columns.items():
        if column not in header:
            raise MissingHeader(f"required column {column!r} is absent", column=column, source=source_name)
    id_position = header.index(columns["company_id"])

    errors: list[RowError] = []
    row_numbers: list[int] = []
    well_formed: list[list[str]] = []
    for index, fields in rows:
        if len(fields) != len(header):
            errors.append(
                RowError(
                    row=index,
                    source=source_name,
                    company_id=fields[id_position].strip() if id_position < len(fields) else "",
                    reason=RowErrorReason.FieldCount,
                    message=f"row has {len(fields)} fields, header has {len(header)}",
                )
            )
            logger.debug("Row %d rejected: %d fields", index, len(fields))
            continue
        row_numbers.append(index)
        well_formed.append(fields)

    text_schema = {column: pl.String for column in header}
    frame = pl.DataFrame(well_formed, schema=text_schema, orient="row") if well_formed else pl.DataFrame(schema=text_schema)

    records: list[CompanyRecord] = []
    seen: set[str] = set()
    for index, row in zip(row_numbers, frame.iter_rows(named=True)):
        raw_id = (row.get(columns["company_id"]) or "").strip()
        try:
            record = _parse_row(index, row, columns)
            if record.company_id in seen:
                raise _RowRejected(RowErrorReason.DuplicateId, f"company_id {record.company_id!r} repeats")
        except _RowRejected as rejected:
            errors.append(
                RowError(
                    row=index,
                    source=source_name,
                    company_id=raw_id,
                    reason=rejected.reason,
                    message=rejected.message,
                )
            )
            logger.debug("Row %d rejected: %s", index, rejected.message)
            continue
        seen.add(record.company_id)
        records.append(record)

    errors.sort(key=lambda error: error.row)
    logger.info("Parsed %d records, %d row errors%s", len(records), len(errors), f" from {source_name}" if source_name else "")
    return records, errors


def load_datasets(
    paths: Sequence[str | Path], schema: ColumnSchema = DEFAULT_SCHEMA
) -> tuple[list[CompanyRecord], list[RowError]]:
    """Parse several files as one dataset; ids repeated across files are row errors."""
    records: list[CompanyRecord] = []
    errors: list[RowError] = []
    seen: set[str] = set()
    for path in paths:
        file_records, file_errors = parse_dataset(path, schema, source_name=str(path))
        errors.extend(file_errors)
        for record in file_records:
            if record.company_id in seen:
                errors.append(
                    RowError(
                        row=record.source_row or 0,
                        source=str(path),
                        company_id=record.company_id,
                        reason=RowErrorReason.DuplicateId,
                        message=f"company_id {record.company_id!r} already seen in an earlier file",
                    )
                )
                continue
            seen.add(record.company_id)
            records.append(record)
    return records, errors


def write_dataset(records: Iterable[CompanyRecord], stream: TextIO, schema: ColumnSchema = DEFAULT_SCHEMA) -> None:
    """Write records in the ingest format; floats use their shortest round-trip form."""
    columns = schema.columns()
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(list(columns.values()))
    for record in records:
        row = []
        for field in columns:
            value = getattr(record, field)
            if value is None:
                row.append("")
            elif isinstance(value, float):
                row.append(repr(value))
            else:
                row.append(value)
        writer.writerow(row)


def _group_key(record: CompanyRecord, level: GroupLevel) -> str:
    if level is GroupLevel.All:
        return ALL_GROUP_KEY
    if level is GroupLevel.Sector:
        return record.sector
    return record.industry


def build_sample(
    records: Sequence[CompanyRecord],
    selector: MetricSelector,
    level: GroupLevel,
    min_group_size: int = 10,
) -> AnalysisSample:
    """
    Select one (size, impact) pair per record and group the survivors.

    Records missing either metric or carrying a zero are dropped as
    ZeroOrMissing (the detail says which), records without a group key as
    MissingGroup, and whole groups below ``min_group_size`` as GroupTooSmall.

    Raises:
        InvalidConfig: ``min_group_size`` is below 3.
        EmptySample: no group survives.
    """
    if min_group_size < 3:
        raise InvalidConfig("min_group_size must be at least 3", min_group_size=min_group_size)

    size_field = SIZE_FIELDS[selector.size_metric]
    dropped: list[DroppedRecord] = []
    grouped: dict[str, list[tuple[CompanyRecord, SamplePoint]]] = defaultdict(list)

    for record in records:
        size = record.size(selector.size_metric)
        impact = record.impact(selector.impact_metric)
        problem = None
        for label, value in ((size_field, size), (selector.impact_metric.value, impact)):
            if value is None:
                problem = f"missing {label}"
                break
            if value <= 0:
                problem = f"zero {label}"
                break
        if problem:
            dropped.append(
                DroppedRecord(row=record.source_row, company_id=record.company_id, reason=DropReason.ZeroOrMissing, detail=problem)
            )
            continue
        key = _group_key(record, level)
        if not key:
            dropped.append(
                DroppedRecord(
                    row=record.source_row,
                    company_id=record.company_id,
                    reason=DropReason.MissingGroup,
                    detail=f"empty {level.value}",
                )
            )
            continue
        grouped[key].append((record, SamplePoint(record.company_id, size, impact)))

    groups: dict[str, list[SamplePoint]] = {}
    for key in sorted(grouped):
        members = grouped[key]
        if len(members) < min_group_size:
            for record, _ in members:
                dropped.append(
                    DroppedRecord(
                        row=record.source_row,
                        company_id=record.company_id,
                        reason=DropReason.GroupTooSmall,
                        detail=f"{key} has {len(members)} < {min_group_size} members",
                    )
                )
            continue
        groups[key] = [point for _, point in members]

    if not groups:
        raise EmptySample(
            "no group survives filtering",
            size=selector.size_metric.value,
            impact=selector.impact_metric.value,
            level=level.value,
            dropped=len(dropped),
        )

    sample = AnalysisSample(
        selector=selector,
        level=level,
        min_group_size=min_group_size,
        groups=groups,
        dropped=dropped,
    )
    logger.info(
        "Sample %s vs %s at %s level: %d groups, %d included, %d dropped",
        selector.impact_metric.value,
        selector.size_metric.value,
        level.value,
        len(groups),
        sample.n_included,
        len(dropped),
    )
    return sample


def coverage_summary(records: Sequence[CompanyRecord], impact_metric: ImpactMetric) -> CoverageSummary:
    """Totals and distinct counts over records with a strictly positive impact value."""
    admitted = [record for record in records if (record.impact(impact_metric) or 0.0) > 0]
    if not admitted:
        return CoverageSummary(impact_metric=impact_metric)

    def total(field: str) -> float:
        return math.fsum(getattr(record, field) or 0.0 for record in admitted)

    total_impact = math.fsum(record.impact(impact_metric) for record in admitted)
    employees = total("employees")
    revenue = total("revenue")
    return CoverageSummary(
        impact_metric=impact_metric,
        total_impact=total_impact,
        companies=len(admitted),
        countries=len({record.country for record in admitted if record.country}),
        sectors=len({record.sector for record in admitted if record.sector}),
        industries=len({record.industry for record in admitted if record.industry}),
        employees=employees,
        revenue=revenue,
        assets=total("assets"),
        market_cap=total("market_cap"),
        impact_per_employee=total_impact / employees if employees > 0 else None,
        impact_per_revenue=total_impact / revenue if revenue > 0 else None,
    )


def audit_entries(dropped: Iterable[DroppedRecord], row_errors: Iterable[RowError] = ()) -> list[dict]:
    """Audit trail entries shaped as ``{"row", "company_id", "reason"}`` plus a detail."""
    entries = [
        {"row": error.row, "company_id": error.company_id, "reason": error.reason.value, "detail": error.message}
        for error in row_errors
    ]
    entries.extend(
        {"row": item.row, "company_id": item.company_id, "reason": item.reason.value, "detail": item.detail}
        for item in dropped
    )
    return entries
