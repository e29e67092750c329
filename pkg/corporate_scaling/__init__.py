from .benchmark import (
    best_size_metric_per_group,
    fit_groups,
    mean_fit_quality,
    predict_benchmark,
    rank_size_metrics,
    regime_summary,
    savings,
    score_companies,
)
from .cache import FitCache
from .config import Settings, load_settings
from .dispersion import country_counts, country_dispersion, country_map_values
from .errors import ScalingError
from .ingest import ColumnSchema, build_sample, coverage_summary, load_datasets, parse_dataset, write_dataset
from .models import CompanyRecord, GroupLevel, ImpactMetric, MetricSelector, SizeMetric
from .regress import bootstrap_ci, classify_regime, fit_loglog, significance_stars
from .report import count_significant, emit_scatter, render_group_table
from .special import regularized_incomplete_beta, student_t_two_sided_p
from .synthgen import SyntheticSpec, generate_multigroup, generate_population
