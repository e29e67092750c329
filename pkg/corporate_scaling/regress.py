"""
Log-log least-squares fitting.

The power law ``Y = Y0 * N**beta`` becomes the straight line
``ln Y = beta * ln N + ln Y0``; every fit here works on natural logs and
reports the intercept in natural-log units.
"""

import logging
import math
from collections.abc import Sequence

import numpy as np

from .errors import DegenerateInput, InvalidConfig, NonPositiveValue, TooFewPoints
from .models import ConfidenceInterval, FitResult, ScalingRegime
from .special import student_t_two_sided_p

logger = logging.getLogger(__name__)

SUBLINEAR_BELOW = 0.98
SUPERLINEAR_ABOVE = 1.02
# residual sum of squares relative to the spread of ln impact below which a fit is exact
EXACT_FIT_TOLERANCE = 1e-24

Points = Sequence[tuple[float, float]] | np.ndarray


def classify_regime(beta: float) -> ScalingRegime:
    """Strict thresholds: 0.98 and 1.02 themselves are Linear."""
    if beta < SUBLINEAR_BELOW:
        return ScalingRegime.Sublinear
    if beta > SUPERLINEAR_ABOVE:
        return ScalingRegime.Superlinear
    return ScalingRegime.Linear


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def _validated_logs(points: Points) -> tuple[np.ndarray, np.ndarray]:
    data = np.asarray(points, dtype=float)
    n = 0 if data.size == 0 else data.shape[0]
    if n < 3:
        raise TooFewPoints("a log-log fit needs at least 3 points", n=n)
    if data.ndim != 2 or data.shape[1] != 2:
        raise InvalidConfig("points must be (size, impact) pairs", shape=list(data.shape))
    if not np.all(np.isfinite(data)) or np.any(data <= 0):
        raise NonPositiveValue("sizes and impacts must be finite and strictly positive", n=n)
    sizes = data[:, 0]
    if np.all(sizes == sizes[0]):
        raise DegenerateInput("all size values are equal; the slope is undefined", n=n)
    return np.log(sizes), np.log(data[:, 1])


def fit_loglog(points: Points, robust_se: bool = False) -> FitResult:
    """
    Fit ln(impact) = beta * ln(size) + intercept_ln by ordinary least squares.

    Args:
        points: (size, impact) pairs, all finite and strictly positive.
        robust_se: use heteroskedasticity-consistent (HC1) standard errors
            instead of the classical ones.

    Returns:
        FitResult with n-2 degrees of freedom inference.
    """
    x, y = _validated_logs(points)
    return _fit_logs(x, y, robust_se)


def _fit_logs(x: np.ndarray, y: np.ndarray, robust_se: bool) -> FitResult:
    n = x.shape[0]
    df = n - 2
    x_mean = float(x.mean())
    y_mean = float(y.mean())
    dx = x - x_mean
    dy = y - y_mean
    sxx = float(dx @ dx)
    if sxx <= 0.0:
        raise DegenerateInput("size values have no spread in log space", n=n)
    syy = float(dy @ dy)
    beta = float(dx @ dy) / sxx
    intercept = y_mean - beta * x_mean
    residuals = dy - beta * dx
    sse = float(residuals @ residuals)

    r2 = 1.0 - sse / syy if syy > 0.0 else 0.0
    r2 = min(1.0, max(0.0, r2))
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / df
    s2 = sse / df

    # centered parametrisation: y = a + beta * dx, intercept = a - beta * x_mean
    if robust_se:
        scale = n / df
        e2 = residuals * residuals
        var_a = scale * float(e2.sum()) / (n * n)
        var_beta = scale * float((dx * dx) @ e2) / (sxx * sxx)
        cov_a_beta = scale * float(dx @ e2) / (n * sxx)
    else:
        var_a = s2 / n
        var_beta = s2 / sxx
        cov_a_beta = 0.0
    var_intercept = var_a + x_mean * x_mean * var_beta - 2.0 * x_mean * cov_a_beta
    se_beta = math.sqrt(max(var_beta, 0.0))
    se_intercept = math.sqrt(max(var_intercept, 0.0))

    if se_beta > 0.0:
        t_beta = beta / se_beta
        p_beta = student_t_two_sided_p(t_beta, df)
    elif beta != 0.0:
        t_beta = math.copysign(math.inf, beta)
        p_beta = 0.0
    else:
        t_beta = 0.0
        p_beta = 1.0

    return FitResult(
        n=n,
        beta=beta,
        intercept_ln=intercept,
        se_beta=se_beta,
        se_intercept=se_intercept,
        t_beta=t_beta,
        p_beta=p_beta,
        r2=r2,
        adj_r2=adj_r2,
        residual_sd=math.sqrt(s2),
        regime=classify_regime(beta),
    )


def bootstrap_ci(
    points: Points,
    level: float = 0.95,
    replicates: int = 1000,
    seed: int = 0,
) -> ConfidenceInterval:
    """
    Percentile bootstrap interval for beta from case-resampled fits.

    Each replicate draws its indices from its own child stream of
    ``SeedSequence(seed)``, so replicates can be evaluated in any order.
    """
    if not 0.0 < level < 1.0:
        raise InvalidConfig("confidence level must lie in (0, 1)", level=level)
    if replicates < 100:
        raise InvalidConfig("at least 100 bootstrap replicates are required", replicates=replicates)
    if seed < 0:
        raise InvalidConfig("bootstrap seed must be non-negative", seed=seed)
    x, y = _validated_logs(points)
    n = x.shape[0]

    children = np.random.SeedSequence(seed).spawn(replicates)
    indices = np.stack([np.random.default_rng(child).integers(0, n, size=n) for child in children])
    xs = x[indices]
    ys = y[indices]
    dx = xs - xs.mean(axis=1, keepdims=True)
    dy = ys - ys.mean(axis=1, keepdims=True)
    sxx = np.einsum("ij,ij->i", dx, dx)
    sxy = np.einsum("ij,ij->i", dx, dy)

    usable = (np.ptp(xs, axis=1) > 0) & (sxx > 0)
    degenerate = int(replicates - usable.sum())
    if degenerate * 2 > replicates:
        raise DegenerateInput(
            "more than half of the bootstrap resamples are degenerate",
            degenerate=degenerate,
            replicates=replicates,
        )
    if degenerate:
        logger.warning("Discarded %d degenerate bootstrap resamples", degenerate)

    betas = sxy[usable] / sxx[usable]
    alpha = 1.0 - level
    low, high = np.quantile(betas, [alpha / 2.0, 1.0 - alpha / 2.0])
    dx_full = x - x.mean()
    dy_full = y - y.mean()
    beta = float(dx_full @ dy_full) / float(dx_full @ dx_full)
    residuals = dy_full - beta * dx_full
    if float(residuals @ residuals) <= EXACT_FIT_TOLERANCE * float(dy_full @ dy_full):
        # every resample refits the same line
        low = high = beta
    return ConfidenceInterval(
        low=float(low),
        high=float(high),
        level=level,
        replicates=replicates,
        seed=seed,
    )
