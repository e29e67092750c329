"""Pydantic data models shared across ingest, fitting, benchmarking and reporting."""

import math
from enum import Enum
from typing import NamedTuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class SizeMetric(str, Enum):
    Employees = "employees"
    MarketCap = "marketcap"
    Assets = "assets"
    Revenue = "revenue"


class ImpactMetric(str, Enum):
    Emissions = "emissions"
    Energy = "energy"
    Water = "water"
    Waste = "waste"


class GroupLevel(str, Enum):
    All = "all"
    Sector = "sector"
    Industry = "industry"


class ScalingRegime(str, Enum):
    Sublinear = "Sublinear"
    Linear = "Linear"
    Superlinear = "Superlinear"


# Column order used by tables and rankings.
SIZE_METRIC_ORDER = (SizeMetric.Employees, SizeMetric.MarketCap, SizeMetric.Assets, SizeMetric.Revenue)

SIZE_FIELDS = {
    SizeMetric.Employees: "employees",
    SizeMetric.MarketCap: "market_cap",
    SizeMetric.Assets: "assets",
    SizeMetric.Revenue: "revenue",
}

IMPACT_FIELDS = {
    ImpactMetric.Emissions: "co2e",
    ImpactMetric.Energy: "energy",
    ImpactMetric.Water: "water",
    ImpactMetric.Waste: "waste",
}

IMPACT_UNITS = {
    ImpactMetric.Emissions: "t CO2e",
    ImpactMetric.Energy: "GJ",
    ImpactMetric.Water: "m3",
    ImpactMetric.Waste: "t",
}

ALL_GROUP_KEY = "All"


class CompanyRecord(BaseModel):
    """One company observation. Numeric fields are None when the cell was empty."""

    model_config = ConfigDict(frozen=True)

    company_id: str = Field(min_length=1)
    name: str = ""
    source_row: int | None = None
    country: str = ""
    sector: str = ""
    industry: str = ""
    employees: float | None = None
    market_cap: float | None = None
    assets: float | None = None
    revenue: float | None = None
    co2e: float | None = None
    energy: float | None = None
    water: float | None = None
    waste: float | None = None

    @field_validator(
        "employees", "market_cap", "assets", "revenue", "co2e", "energy", "water", "waste"
    )
    @classmethod
    def _finite_non_negative(cls, value: float | None) -> float | None:
        # zero is kept so the sample builder can audit it; negatives are corrupt input
        if value is None:
            return None
        if not math.isfinite(value):
            raise ValueError("value must be finite")
        if value < 0:
            raise ValueError("value must not be negative")
        return value

    def size(self, metric: SizeMetric) -> float | None:
        return getattr(self, SIZE_FIELDS[metric])

    def impact(self, metric: ImpactMetric) -> float | None:
        return getattr(self, IMPACT_FIELDS[metric])


class MetricSelector(BaseModel):
    model_config = ConfigDict(frozen=True)

    size_metric: SizeMetric
    impact_metric: ImpactMetric


class RowErrorReason(str, Enum):
    MissingId = "MissingId"
    DuplicateId = "DuplicateId"
    MalformedNumber = "MalformedNumber"
    NonPositiveValue = "NonPositiveValue"
    InvalidCountry = "InvalidCountry"
    FieldCount = "FieldCount"


class RowError(BaseModel):
    row: int
    source: str = ""
    company_id: str
    reason: RowErrorReason
    message: str = ""


class DropReason(str, Enum):
    ZeroOrMissing = "ZeroOrMissing"
    MissingGroup = "MissingGroup"
    GroupTooSmall = "GroupTooSmall"


class DroppedRecord(BaseModel):
    row: int | None = None
    company_id: str
    reason: DropReason
    detail: str = ""


class SamplePoint(NamedTuple):
    company_id: str
    size: float
    impact: float


class AnalysisSample(BaseModel):
    selector: MetricSelector
    level: GroupLevel
    min_group_size: int
    groups: dict[str, list[SamplePoint]]
    dropped: list[DroppedRecord] = Field(default_factory=list)

    @property
    def n_included(self) -> int:
        return sum(len(points) for points in self.groups.values())

    def included_ids(self) -> set[str]:
        return {point.company_id for points in self.groups.values() for point in points}


class CoverageSummary(BaseModel):
    impact_metric: ImpactMetric
    total_impact: float = 0.0
    companies: int = 0
    countries: int = 0
    sectors: int = 0
    industries: int = 0
    employees: float = 0.0
    revenue: float = 0.0
    assets: float = 0.0
    market_cap: float = 0.0
    impact_per_employee: float | None = None
    impact_per_revenue: float | None = None


class FitResult(BaseModel):
    """Least-squares fit of ln(impact) on ln(size); intercept is in natural-log units."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=3)
    beta: float
    intercept_ln: float
    se_beta: float = Field(ge=0)
    se_intercept: float = Field(ge=0)
    t_beta: float
    p_beta: float = Field(ge=0, le=1)
    r2: float = Field(ge=0, le=1)
    adj_r2: float
    residual_sd: float = Field(ge=0)
    regime: ScalingRegime

    @model_validator(mode="after")
    def _adj_below_r2(self) -> "FitResult":
        if self.adj_r2 > self.r2 + 1e-12:
            raise ValueError("adj_r2 cannot exceed r2")
        return self


class ConfidenceInterval(BaseModel):
    low: float
    high: float
    level: float = Field(gt=0, lt=1)
    replicates: int
    seed: int


class SkippedGroup(BaseModel):
    group_key: str
    reason: str
    message: str = ""


class GroupedFits(BaseModel):
    selector: MetricSelector
    level: GroupLevel
    fits: dict[str, FitResult] = Field(default_factory=dict)
    skipped: list[SkippedGroup] = Field(default_factory=list)


class BenchmarkScore(BaseModel):
    company_id: str
    group_key: str
    size_value: float
    actual_impact: float
    predicted_impact: float
    residual_ln: float
    ratio: float

    @property
    def above_benchmark(self) -> bool:
        return self.residual_ln > 0


class GroupSavings(BaseModel):
    group_key: str
    n: int
    total_actual: float
    total_capped: float
    savings_fraction: float
    share_of_savings: float


class SavingsReport(BaseModel):
    selector: MetricSelector
    level: GroupLevel
    total_actual: float
    total_capped: float
    savings_fraction: float
    per_group: list[GroupSavings] = Field(default_factory=list)
    excluded: list[str] = Field(default_factory=list)
    fallback_scored: list[str] = Field(default_factory=list)


class SizeMetricRank(BaseModel):
    size_metric: SizeMetric
    mean_adj_r2: float
    significant_share: float
    groups_fitted: int


class FitQuality(BaseModel):
    groups_fitted: int
    mean_r2: float
    mean_adj_r2: float


class CountryStats(BaseModel):
    country: str
    n: int = Field(ge=1)
    mean_residual_ln: float
    sd_residual_ln: float = Field(ge=0)
    cv: float | None
    beyond_one_sd: bool


class DispersionReport(BaseModel):
    pooled_sd: float
    countries: list[CountryStats]
    unknown: list[str] = Field(default_factory=list)

    @property
    def n_flagged(self) -> int:
        return sum(1 for stats in self.countries if stats.beyond_one_sd)
