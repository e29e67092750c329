import math

from corporate_scaling.errors import InvalidDf, InvalidStatistic
from corporate_scaling.special import regularized_incomplete_beta, student_t_two_sided_p
import numpy as np
import pytest

T_GRID = (0.0, 0.5, 1.0, 2.0, 2.228, 5.0, 12.706)
DF_GRID = (1, 2, 10, 100, 6527)


def _integrated_p(t, df, intervals=20000):
    """1 - 2 * integral of the t density over [0, |t|], by Simpson's rule."""
    t = abs(t)
    if t == 0.0:
        return 1.0
    log_norm = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)
    u = np.linspace(0.0, t, intervals + 1)
    density = np.exp(log_norm - (df + 1) / 2 * np.log1p(u * u / df))
    weights = np.ones(intervals + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    area = (t / intervals) / 3.0 * float(weights @ density)
    return 1.0 - 2.0 * area


def test_incomplete_beta_closed_forms():
    assert regularized_incomplete_beta(0.5, 1.0, 1.0) == pytest.approx(0.5, abs=1e-14)
    for x in (0.1, 0.37, 0.9):
        assert regularized_incomplete_beta(x, 3.0, 1.0) == pytest.approx(x ** 3, rel=1e-12)
        assert regularized_incomplete_beta(x, 1.0, 2.0) == pytest.approx(1 - (1 - x) ** 2, rel=1e-12)
    assert regularized_incomplete_beta(0.0, 2.0, 3.0) == 0.0
    assert regularized_incomplete_beta(1.0, 2.0, 3.0) == 1.0


def test_incomplete_beta_reflection_symmetry():
    rng = np.random.default_rng(13)
    for _ in range(5000):
        a = float(rng.uniform(0.1, 100.0))
        b = float(rng.uniform(0.1, 100.0))
        x = float(rng.uniform(0.0, 1.0))
        total = regularized_incomplete_beta(x, a, b) + regularized_incomplete_beta(1.0 - x, b, a)
        assert total == pytest.approx(1.0, abs=1e-12), (x, a, b)


def test_incomplete_beta_rejects_bad_arguments():
    with pytest.raises(InvalidStatistic):
        regularized_incomplete_beta(1.5, 1.0, 1.0)
    with pytest.raises(InvalidStatistic):
        regularized_incomplete_beta(0.5, 0.0, 1.0)


def test_t_p_value_closed_forms():
    assert student_t_two_sided_p(0.0, 5) == 1.0
    # Cauchy: P(|T| > 1) = 1/2
    assert student_t_two_sided_p(1.0, 1) == pytest.approx(0.5, abs=1e-12)
    # df = 2: p = 1 - t / sqrt(2 + t^2)
    for t in (0.5, 2.0, 7.0):
        assert student_t_two_sided_p(t, 2) == pytest.approx(1 - t / math.sqrt(2 + t * t), abs=1e-12)
    assert student_t_two_sided_p(2.228, 10) == pytest.approx(0.05, abs=1e-4)
    assert student_t_two_sided_p(12.706, 1) == pytest.approx(0.05, abs=1e-4)


def test_t_p_value_matches_numerical_integration():
    for t in T_GRID:
        for df in DF_GRID:
            assert student_t_two_sided_p(t, df) == pytest.approx(_integrated_p(t, df), abs=1e-6), (t, df)


def test_t_p_value_symmetry_and_monotonicity():
    rng = np.random.default_rng(7)
    for _ in range(10000):
        t = float(rng.uniform(0, 20))
        df = float(rng.integers(1, 7000))
        step = float(rng.uniform(0.01, 2))
        p = student_t_two_sided_p(t, df)
        assert 0.0 <= p <= 1.0
        assert student_t_two_sided_p(-t, df) == p
        assert student_t_two_sided_p(t + step, df) <= p


def test_t_p_value_extremes():
    assert student_t_two_sided_p(1e200, 3) == 0.0
    assert student_t_two_sided_p(40.0, 6527) < 1e-300


def test_t_p_value_rejects_bad_input():
    with pytest.raises(InvalidDf):
        student_t_two_sided_p(1.0, 0)
    with pytest.raises(InvalidDf):
        student_t_two_sided_p(1.0, math.nan)
    with pytest.raises(InvalidStatistic):
        student_t_two_sided_p(math.nan, 5)
    with pytest.raises(InvalidStatistic):
        student_t_two_sided_p(math.inf, 5)


def main():
    test_incomplete_beta_closed_forms()
    test_incomplete_beta_reflection_symmetry()
    test_incomplete_beta_rejects_bad_arguments()
    test_t_p_value_closed_forms()
    test_t_p_value_matches_numerical_integration()
    test_t_p_value_symmetry_and_monotonicity()
    test_t_p_value_extremes()
    test_t_p_value_rejects_bad_input()
    print("All tests passed.")


if __name__ == "__main__":
    main()
