"""Per-country deviation of company scores from their group benchmark."""

import logging
import math
from collections import Counter, defaultdict
from collections.abc import Sequence

import numpy as np

from .models import BenchmarkScore, CompanyRecord, CountryStats, DispersionReport

logger = logging.getLogger(__name__)

_CV_MEAN_FLOOR = 1e-12


def _population_sd(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean((values - values.mean()) ** 2)))


def country_dispersion(scores: Sequence[BenchmarkScore], records: Sequence[CompanyRecord]) -> DispersionReport:
    """
    Group log residuals by country of incorporation.

    A country is flagged when |mean residual| strictly exceeds the pooled
    residual SD; both SDs use the population convention (divisor n). The CV
    is taken over the country's actual/benchmark ratios and is None when
    their mean is below 1e-12. Scores whose company has no country are listed
    in ``unknown``.
    """
    country_of = {record.company_id: record.country for record in records}
    residuals: dict[str, list[float]] = defaultdict(list)
    ratios: dict[str, list[float]] = defaultdict(list)
    unknown: list[str] = []
    for score in scores:
        country = country_of.get(score.company_id)
        if not country:
            logger.warning("UnknownCountry: company %s has no country of incorporation", score.company_id)
            unknown.append(score.company_id)
            continue
        residuals[country].append(score.residual_ln)
        ratios[country].append(score.ratio)

    if not residuals:
        return DispersionReport(pooled_sd=0.0, countries=[], unknown=unknown)

    pooled = _population_sd(np.array([value for values in residuals.values() for value in values]))
    countries = []
    for country in sorted(residuals):
        values = np.array(residuals[country])
        ratio_values = np.array(ratios[country])
        mean = float(values.mean())
        ratio_mean = float(ratio_values.mean())
        cv = _population_sd(ratio_values) / abs(ratio_mean) if abs(ratio_mean) >= _CV_MEAN_FLOOR else None
        countries.append(
            CountryStats(
                country=country,
                n=len(values),
                mean_residual_ln=mean,
                sd_residual_ln=_population_sd(values),
                cv=cv,
                beyond_one_sd=abs(mean) > pooled,
            )
        )
    countries.sort(key=lambda stats: (-abs(stats.mean_residual_ln), stats.country))
    report = DispersionReport(pooled_sd=pooled, countries=countries, unknown=unknown)
    logger.info("%d of %d countries beyond one pooled SD (%.4f)", report.n_flagged, len(countries), pooled)
    return report


def country_counts(records: Sequence[CompanyRecord]) -> list[tuple[str, int]]:
    """(country, companies) pairs for map tools, sorted by country code."""
    counts = Counter(record.country for record in records if record.country)
    return sorted(counts.items())


def country_map_values(report: DispersionReport) -> list[tuple[str, float]]:
    """(country, mean log residual) pairs for map tools, sorted by country code."""
    return sorted((stats.country, stats.mean_residual_ln) for stats in report.countries)


def residual_total(report: DispersionReport) -> float:
    return math.fsum(stats.n * stats.mean_residual_ln for stats in report.countries)
