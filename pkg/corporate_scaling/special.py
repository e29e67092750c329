"""
Special functions needed for regression inference.

The regularized incomplete beta is evaluated with the modified Lentz
continued fraction (Numerical Recipes ``betacf``); the Student-t tail
probability is expressed through it.
"""

import math

from .errors import InvalidDf, InvalidStatistic

_MAX_ITER = 10_000
_EPS = 1e-15
_FPMIN = 1e-300


def log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise InvalidStatistic(
        "incomplete beta continued fraction did not converge", a=a, b=b, x=x
    )


def regularized_incomplete_beta(x: float, a: float, b: float, y: float | None = None) -> float:
    """
    I_x(a, b) for a, b > 0 and 0 <= x <= 1.

    ``y`` may carry 1 - x computed without cancellation; it defaults to 1 - x.
    """
    if not (a > 0 and b > 0) or not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidStatistic("shape parameters must be positive and finite", a=a, b=b)
    if y is None:
        y = 1.0 - x
    if not 0.0 <= x <= 1.0:
        raise InvalidStatistic("x must lie in [0, 1]", x=x)
    if x == 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log(y) - log_beta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_continued_fraction(a, b, x) / a
    return 1.0 - math.exp(log_front) * _beta_continued_fraction(b, a, y) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """2 * P(T >= |t|) for T ~ Student-t(df)."""
    if not math.isfinite(df) or df < 1:
        raise InvalidDf("degrees of freedom must be >= 1", df=df)
    if not math.isfinite(t):
        raise InvalidStatistic("t statistic must be finite", t=t)
    if t == 0.0:
        return 1.0
    t2 = t * t
    if math.isinf(t2):
        return 0.0
    x = df / (df + t2)
    y = 1.0 / (1.0 + df / t2)
    p = regularized_incomplete_beta(x, 0.5 * df, 0.5, y)
    return min(1.0, max(0.0, p))
