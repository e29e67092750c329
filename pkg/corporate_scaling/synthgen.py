"""
Synthetic corporate populations with known scaling parameters.

Random numbers come from a counter-based SplitMix64: the uniform for record
``i``, draw ``j`` is the output of SplitMix64 at counter ``i * 8 + j`` of the
stream started at ``seed``, i.e. ``mix(seed + (i * 8 + j + 1) * GOLDEN)``,
keeping the top 53 bits and mapping them to (0, 1]. Normals use Box-Muller
on draws 0 and 1 (noise) or 2 and 3 (log-normal sizes), Pareto sizes use the
inverse CDF on draw 2, and the country comes from draw 4. Every record is a
pure function of (spec, index), so generation can be split freely.
"""

import json
import logging
import math
from collections.abc import Sequence
from pathlib import Path
from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from .errors import DuplicateGroupKey, InvalidSpec
from .models import (
    CompanyRecord,
    IMPACT_FIELDS,
    ImpactMetric,
    SIZE_FIELDS,
    SizeMetric,
)

logger = logging.getLogger(__name__)

_MASK = (1 << 64) - 1
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
DRAWS_PER_RECORD = 8

COUNTRY_POOL = ("CH", "DE", "FR", "GB", "IT", "JP", "NL", "US")


class ParetoDist(BaseModel):
    kind: Literal["pareto"] = "pareto"
    x_min: float = Field(gt=0)
    alpha: float = Field(gt=0)

    def log_variance(self) -> float:
        # ln(X / x_min) is exponential with rate alpha
        return 1.0 / (self.alpha * self.alpha)


class LogNormalDist(BaseModel):
    kind: Literal["lognormal"] = "lognormal"
    mu: float
    sigma: float = Field(ge=0)

    def log_variance(self) -> float:
        return self.sigma * self.sigma


SizeDistribution = Annotated[ParetoDist | LogNormalDist, Field(discriminator="kind")]


class SyntheticSpec(BaseModel):
    n: int = Field(ge=1)
    beta_true: float
    intercept_ln_true: float
    noise_sd: float = Field(ge=0)
    size_dist: SizeDistribution
    group_key: str = Field(min_length=1)
    seed: int = Field(ge=0, le=_MASK)
    size_metric: SizeMetric = SizeMetric.Revenue
    impact_metric: ImpactMetric = ImpactMetric.Emissions


def _splitmix64(counters: np.ndarray, seed: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = np.uint64(seed) + (counters + np.uint64(1)) * GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def uniforms(seed: int, n: int, draw: int) -> np.ndarray:
    """Uniforms in (0, 1] for records 0..n-1 at one draw slot."""
    counters = np.arange(n, dtype=np.uint64) * np.uint64(DRAWS_PER_RECORD) + np.uint64(draw)
    bits = _splitmix64(counters, seed) >> np.uint64(11)
    return (bits.astype(np.float64) + 1.0) * 2.0**-53


def _standard_normals(seed: int, n: int, first_draw: int) -> np.ndarray:
    u1 = uniforms(seed, n, first_draw)
    u2 = uniforms(seed, n, first_draw + 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)


def generate_arrays(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Sizes, impacts and countries for ``spec`` without building records."""
    dist = spec.size_dist
    if isinstance(dist, ParetoDist):
        sizes = dist.x_min * uniforms(spec.seed, spec.n, 2) ** (-1.0 / dist.alpha)
    else:
        sizes = np.exp(dist.mu + dist.sigma * _standard_normals(spec.seed, spec.n, 2))
    noise = spec.noise_sd * _standard_normals(spec.seed, spec.n, 0) if spec.noise_sd > 0 else np.zeros(spec.n)
    impacts = np.exp(spec.intercept_ln_true + spec.beta_true * np.log(sizes) + noise)
    if not (np.all(np.isfinite(sizes)) and np.all(np.isfinite(impacts)) and np.all(sizes > 0) and np.all(impacts > 0)):
        raise InvalidSpec("spec produces non-finite or non-positive values", group_key=spec.group_key)
    picks = np.minimum((uniforms(spec.seed, spec.n, 4) * len(COUNTRY_POOL)).astype(np.int64), len(COUNTRY_POOL) - 1)
    countries = [COUNTRY_POOL[index] for index in picks]
    return sizes, impacts, countries


def generate_population(spec: SyntheticSpec) -> list[CompanyRecord]:
    """Records carrying ``spec.group_key`` as both sector and industry."""
    sizes, impacts, countries = generate_arrays(spec)
    size_field = SIZE_FIELDS[spec.size_metric]
    impact_field = IMPACT_FIELDS[spec.impact_metric]
    width = len(str(spec.n - 1))
    return [
        CompanyRecord(
            company_id=f"SYN-{spec.group_key}-{index:0{width}d}",
            name=f"{spec.group_key} synthetic {index}",
            country=countries[index],
            sector=spec.group_key,
            industry=spec.group_key,
            **{size_field: float(sizes[index]), impact_field: float(impacts[index])},
        )
        for index in range(spec.n)
    ]


def generate_multigroup(specs: Sequence[SyntheticSpec]) -> list[CompanyRecord]:
    """Concatenation of independent populations, in the order of ``specs``."""
    seen: set[str] = set()
    for spec in specs:
        if spec.group_key in seen:
            raise DuplicateGroupKey(f"group key {spec.group_key!r} appears twice", group_key=spec.group_key)
        seen.add(spec.group_key)
    records: list[CompanyRecord] = []
    for spec in specs:
        records.extend(generate_population(spec))
    logger.info("Generated %d synthetic records in %d groups", len(records), len(specs))
    return records


def noise_sd_for_target_r2(beta: float, size_dist: ParetoDist | LogNormalDist, target_r2: float) -> float:
    """
    Log-space noise SD giving an expected R² of ``target_r2``.

    From R² = beta² Var(ln N) / (beta² Var(ln N) + sigma²).
    """
    if not 0.0 < target_r2 < 1.0:
        raise InvalidSpec("target R² must lie in (0, 1)", target_r2=target_r2)
    return abs(beta) * math.sqrt(size_dist.log_variance() * (1.0 - target_r2) / target_r2)


def r2_from_adjusted(adj_r2: float, n: int) -> float:
    return 1.0 - (1.0 - adj_r2) * (n - 2) / (n - 1)


def load_specs(path: str | Path) -> list[SyntheticSpec]:
    """Read specs from JSON: one object, a list, or ``{"specs": [...]}``."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"spec file is not valid JSON: {exc}", path=str(path)) from exc
    if isinstance(payload, dict) and "specs" in payload:
        payload = payload["specs"]
    if isinstance(payload, dict):
        payload = [payload]
    try:
        return [SyntheticSpec.model_validate(item) for item in payload]
    except ValidationError as exc:
        raise InvalidSpec(f"invalid synthetic spec: {exc.errors()[0]['msg']}", path=str(path)) from exc
