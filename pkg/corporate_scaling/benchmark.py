"""
Group-level benchmarks: one independent log-log fit per group, company
scores against the fitted line, enforcement savings and size-metric ranking.
"""

import logging
import math
from collections import Counter
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

from .cache import FitCache
from .errors import EmptySample, FitError, GroupNotFitted, NonPositiveSize
from .ingest import build_sample
from .models import (
    AnalysisSample,
    BenchmarkScore,
    CompanyRecord,
    FitQuality,
    FitResult,
    GroupedFits,
    GroupLevel,
    GroupSavings,
    ImpactMetric,
    MetricSelector,
    SamplePoint,
    SavingsReport,
    ScalingRegime,
    SIZE_METRIC_ORDER,
    SizeMetric,
    SizeMetricRank,
    SkippedGroup,
)
from .regress import fit_loglog

logger = logging.getLogger(__name__)

# tie-break order for rank_size_metrics
RANKING_TIE_ORDER = (SizeMetric.Revenue, SizeMetric.Employees, SizeMetric.Assets, SizeMetric.MarketCap)


def group_points(points: Sequence[SamplePoint]) -> list[tuple[float, float]]:
    return [(point.size, point.impact) for point in points]


def fit_groups(
    sample: AnalysisSample,
    robust_se: bool = False,
    workers: int = 1,
    cache: FitCache | None = None,
) -> GroupedFits:
    """
    Fit every group of ``sample`` independently.

    Groups that cannot be fitted land in ``skipped`` with the error code as
    reason. Results are assembled in sorted group order, so ``workers > 1``
    yields the same output as sequential fitting.
    """
    if not sample.groups:
        raise EmptySample("sample has no groups to fit")
    keys = sorted(sample.groups)

    def fit_one(key: str) -> FitResult | FitError:
        points = group_points(sample.groups[key])
        try:
            if cache is not None:
                return cache.fit(points, robust_se=robust_se)
            return fit_loglog(points, robust_se=robust_se)
        except FitError as exc:
            return exc

    if workers > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(fit_one, keys))
    else:
        outcomes = [fit_one(key) for key in keys]

    fits: dict[str, FitResult] = {}
    skipped: list[SkippedGroup] = []
    for key, outcome in zip(keys, outcomes):
        if isinstance(outcome, FitError):
            logger.warning("Group %r skipped: %s (%s)", key, outcome.code, outcome.message)
            skipped.append(SkippedGroup(group_key=key, reason=outcome.code, message=outcome.message))
        else:
            fits[key] = outcome
    logger.info("Fitted %d groups, skipped %d", len(fits), len(skipped))
    return GroupedFits(selector=sample.selector, level=sample.level, fits=fits, skipped=skipped)


def predict_benchmark(fit: FitResult, size_value: float) -> float:
    """Median (log-space) prediction exp(intercept_ln) * size**beta, without smearing correction."""
    if not (size_value > 0 and math.isfinite(size_value)):
        raise NonPositiveSize("size must be finite and strictly positive", size=size_value)
    return math.exp(fit.intercept_ln + fit.beta * math.log(size_value))


def _score(point: SamplePoint, group_key: str, fit: FitResult) -> BenchmarkScore:
    predicted = predict_benchmark(fit, point.size)
    return BenchmarkScore(
        company_id=point.company_id,
        group_key=group_key,
        size_value=point.size,
        actual_impact=point.impact,
        predicted_impact=predicted,
        residual_ln=math.log(point.impact) - math.log(predicted),
        ratio=point.impact / predicted,
    )


def unscored_companies(sample: AnalysisSample, grouped: GroupedFits) -> list[GroupNotFitted]:
    """One GroupNotFitted per company whose group has no fit."""
    missing = []
    for key in sorted(sample.groups):
        if key in grouped.fits:
            continue
        for point in sample.groups[key]:
            missing.append(
                GroupNotFitted(f"group {key!r} has no fit", company_id=point.company_id, group_key=key)
            )
    return missing


def score_companies(sample: AnalysisSample, grouped: GroupedFits) -> list[BenchmarkScore]:
    """
    Score each included company against its group's benchmark line.

    Companies in unfitted groups are omitted and logged. Output is ordered by
    group key, then by descending residual, then by company id.
    """
    scores: list[BenchmarkScore] = []
    for key in sorted(sample.groups):
        fit = grouped.fits.get(key)
        if fit is None:
            continue
        group_scores = [_score(point, key, fit) for point in sample.groups[key]]
        group_scores.sort(key=lambda score: (-score.residual_ln, score.company_id))
        scores.extend(group_scores)
    for problem in unscored_companies(sample, grouped):
        logger.warning("Company %s not scored: %s", problem.details["company_id"], problem.message)
    return scores


def savings(
    sample: AnalysisSample,
    grouped: GroupedFits,
    fallback: GroupedFits | None = None,
) -> SavingsReport:
    """
    Totals when every company is capped at its benchmark.

    Companies in unfitted groups are scored against ``fallback`` (an
    all-companies fit) when it is given, otherwise excluded and listed.

    Raises:
        EmptySample: no company can be scored.
    """
    fallback_fit = None
    if fallback is not None and fallback.fits:
        fallback_fit = next(iter(fallback.fits.values()))

    per_group_totals: list[tuple[str, int, float, float]] = []
    excluded: list[str] = []
    fallback_scored: list[str] = []
    for key in sorted(sample.groups):
        points = sample.groups[key]
        fit = grouped.fits.get(key)
        if fit is None and fallback_fit is not None:
            fit = fallback_fit
            fallback_scored.extend(point.company_id for point in points)
        if fit is None:
            excluded.extend(point.company_id for point in points)
            continue
        actual = math.fsum(point.impact for point in points)
        capped = math.fsum(min(point.impact, predict_benchmark(fit, point.size)) for point in points)
        per_group_totals.append((key, len(points), actual, capped))

    if not per_group_totals:
        raise EmptySample("no scored companies to compute savings over")

    total_actual = math.fsum(actual for _, _, actual, _ in per_group_totals)
    total_capped = math.fsum(capped for _, _, _, capped in per_group_totals)
    total_saved = total_actual - total_capped
    per_group = [
        GroupSavings(
            group_key=key,
            n=n,
            total_actual=actual,
            total_capped=capped,
            savings_fraction=(actual - capped) / actual,
            share_of_savings=(actual - capped) / total_saved if total_saved > 0 else 0.0,
        )
        for key, n, actual, capped in per_group_totals
    ]
    if excluded:
        logger.warning("%d companies in unfitted groups excluded from savings", len(excluded))
    report = SavingsReport(
        selector=grouped.selector,
        level=grouped.level,
        total_actual=total_actual,
        total_capped=total_capped,
        savings_fraction=total_saved / total_actual,
        per_group=per_group,
        excluded=excluded,
        fallback_scored=fallback_scored,
    )
    logger.info("Savings %.4f of %.6g total", report.savings_fraction, total_actual)
    return report


def regime_summary(grouped: GroupedFits) -> dict[ScalingRegime, int]:
    counts = Counter(fit.regime for fit in grouped.fits.values())
    return {regime: counts.get(regime, 0) for regime in ScalingRegime}


def mean_fit_quality(grouped: GroupedFits) -> FitQuality:
    fits = list(grouped.fits.values())
    if not fits:
        return FitQuality(groups_fitted=0, mean_r2=0.0, mean_adj_r2=0.0)
    return FitQuality(
        groups_fitted=len(fits),
        mean_r2=math.fsum(fit.r2 for fit in fits) / len(fits),
        mean_adj_r2=math.fsum(fit.adj_r2 for fit in fits) / len(fits),
    )


def fits_by_size_metric(
    records: Sequence[CompanyRecord],
    impact_metric: ImpactMetric,
    level: GroupLevel,
    min_group_size: int = 10,
    robust_se: bool = False,
    workers: int = 1,
    cache: FitCache | None = None,
) -> dict[SizeMetric, GroupedFits]:
    """Grouped fits for every size metric that yields a non-empty sample."""
    results: dict[SizeMetric, GroupedFits] = {}
    for size_metric in SIZE_METRIC_ORDER:
        selector = MetricSelector(size_metric=size_metric, impact_metric=impact_metric)
        try:
            sample = build_sample(records, selector, level, min_group_size)
        except EmptySample:
            logger.info("No %s sample for %s", size_metric.value, impact_metric.value)
            continue
        results[size_metric] = fit_groups(sample, robust_se=robust_se, workers=workers, cache=cache)
    return results


def rank_size_metrics(
    records: Sequence[CompanyRecord],
    impact_metric: ImpactMetric,
    level: GroupLevel,
    min_group_size: int = 10,
    weighted: bool = False,
    robust_se: bool = False,
    workers: int = 1,
    cache: FitCache | None = None,
) -> list[SizeMetricRank]:
    """
    Order size metrics by mean adjusted R² across fitted groups.

    The mean is unweighted unless ``weighted`` is set, in which case each
    group counts with its n. Ties fall back to the share of groups with
    p < 0.001, then to the order Revenue, Employees, Assets, MarketCap.
    """
    ranks: list[SizeMetricRank] = []
    for size_metric, grouped in fits_by_size_metric(
        records, impact_metric, level, min_group_size, robust_se, workers, cache
    ).items():
        fits = list(grouped.fits.values())
        if not fits:
            continue
        if weighted:
            total_n = sum(fit.n for fit in fits)
            mean_adj_r2 = math.fsum(fit.adj_r2 * fit.n for fit in fits) / total_n
        else:
            mean_adj_r2 = math.fsum(fit.adj_r2 for fit in fits) / len(fits)
        significant = sum(1 for fit in fits if fit.p_beta < 0.001)
        ranks.append(
            SizeMetricRank(
                size_metric=size_metric,
                mean_adj_r2=mean_adj_r2,
                significant_share=significant / len(fits),
                groups_fitted=len(fits),
            )
        )
    if not ranks:
        raise EmptySample("no size metric yields a fittable sample", impact=impact_metric.value)
    ranks.sort(
        key=lambda rank: (-rank.mean_adj_r2, -rank.significant_share, RANKING_TIE_ORDER.index(rank.size_metric))
    )
    return ranks


def best_size_metric_per_group(
    records: Sequence[CompanyRecord],
    impact_metric: ImpactMetric,
    level: GroupLevel,
    min_group_size: int = 10,
    cache: FitCache | None = None,
) -> dict[str, SizeMetric]:
    """For each group, the size metric whose fit has the highest adjusted R²."""
    best: dict[str, tuple[float, int, SizeMetric]] = {}
    for size_metric, grouped in fits_by_size_metric(
        records, impact_metric, level, min_group_size, cache=cache
    ).items():
        order = RANKING_TIE_ORDER.index(size_metric)
        for key, fit in grouped.fits.items():
            candidate = (fit.adj_r2, -order, size_metric)
            if key not in best or candidate[:2] > best[key][:2]:
                best[key] = candidate
    return {key: best[key][2] for key in sorted(best)}
