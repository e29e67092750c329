import math

from corporate_scaling.errors import DegenerateInput, InvalidConfig, NonPositiveValue, TooFewPoints
from corporate_scaling.models import ScalingRegime
from corporate_scaling.regress import bootstrap_ci, classify_regime, fit_loglog, significance_stars
from corporate_scaling.synthgen import ParetoDist, SyntheticSpec, generate_arrays
import numpy as np
import pytest


def _oracle(points):
    """Uncentered normal equations on [1, ln size]."""
    data = np.asarray(points, dtype=float)
    x = np.log(data[:, 0])
    y = np.log(data[:, 1])
    design = np.column_stack([np.ones_like(x), x])
    xtx = design.T @ design
    coef = np.linalg.solve(xtx, design.T @ y)
    resid = y - design @ coef
    n = len(x)
    s2 = float(resid @ resid) / (n - 2)
    cov = s2 * np.linalg.inv(xtx)
    sst = float(((y - y.mean()) ** 2).sum())
    return {
        "intercept": coef[0],
        "beta": coef[1],
        "se_intercept": math.sqrt(cov[0, 0]),
        "se_beta": math.sqrt(cov[1, 1]),
        "r2": 1.0 - float(resid @ resid) / sst,
        "resid": resid,
        "design": design,
    }


def _random_points(rng, n):
    sizes = np.exp(rng.uniform(math.log(1e-3), math.log(1e6), size=n))
    impacts = np.exp(rng.uniform(math.log(1e-3), math.log(1e6), size=n))
    return list(zip(sizes.tolist(), impacts.tolist()))


def test_classify_regime_thresholds():
    expected = {
        0.944: ScalingRegime.Sublinear,
        0.98: ScalingRegime.Linear,
        1.00: ScalingRegime.Linear,
        1.02: ScalingRegime.Linear,
        1.144: ScalingRegime.Superlinear,
    }
    for beta, regime in expected.items():
        assert classify_regime(beta) is regime


def test_significance_stars():
    assert significance_stars(2e-16) == "***"
    assert significance_stars(0.005) == "**"
    assert significance_stars(0.02) == "*"
    assert significance_stars(0.05) == ""
    assert significance_stars(0.2) == ""


def test_exact_power_law():
    fit = fit_loglog([(1.0, 2.0), (10.0, 20.0), (100.0, 200.0)])
    assert fit.n == 3
    assert fit.beta == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept_ln == pytest.approx(math.log(2.0), abs=1e-12)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.p_beta == pytest.approx(0.0, abs=1e-12)
    assert fit.regime is ScalingRegime.Linear


def test_three_point_hand_oracle():
    points = [(1.0, 1.0), (math.e, math.e ** 2), (math.e ** 2, math.e ** 3)]
    fit = fit_loglog(points)
    assert fit.beta == pytest.approx(1.5, abs=1e-12)
    assert fit.intercept_ln == pytest.approx(1.0 / 6.0, abs=1e-12)
    assert fit.r2 == pytest.approx(27.0 / 28.0, abs=1e-12)
    assert fit.residual_sd == pytest.approx(math.sqrt(1.0 / 6.0), abs=1e-12)


def test_point_order_does_not_matter():
    rng = np.random.default_rng(17)
    fields = ("beta", "intercept_ln", "se_beta", "se_intercept", "t_beta", "p_beta", "r2", "adj_r2", "residual_sd")
    for _ in range(200):
        points = _random_points(rng, int(rng.integers(3, 51)))
        base = fit_loglog(points)
        shuffled = fit_loglog([points[i] for i in rng.permutation(len(points))])
        assert shuffled.n == base.n
        assert shuffled.regime is base.regime
        for field in fields:
            assert getattr(shuffled, field) == pytest.approx(getattr(base, field), rel=1e-12, abs=1e-10), field


def test_fitted_line_minimises_squared_residuals():
    rng = np.random.default_rng(19)
    for _ in range(200):
        points = _random_points(rng, int(rng.integers(3, 51)))
        fit = fit_loglog(points)
        data = np.log(np.asarray(points))

        def sse(beta, intercept):
            residuals = data[:, 1] - beta * data[:, 0] - intercept
            return float(residuals @ residuals)

        best = sse(fit.beta, fit.intercept_ln)
        for step in (-1e-3, 1e-3):
            assert sse(fit.beta + step, fit.intercept_ln) > best
            assert sse(fit.beta, fit.intercept_ln + step) > best


def test_matches_normal_equations_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(3, 51))
        points = _random_points(rng, n)
        fit = fit_loglog(points)
        oracle = _oracle(points)
        tol = dict(rel=1e-10, abs=1e-10)
        assert fit.beta == pytest.approx(oracle["beta"], **tol)
        assert fit.intercept_ln == pytest.approx(oracle["intercept"], **tol)
        assert fit.r2 == pytest.approx(min(1.0, max(0.0, oracle["r2"])), **tol)
        assert fit.se_beta == pytest.approx(oracle["se_beta"], **tol)
        assert fit.se_intercept == pytest.approx(oracle["se_intercept"], **tol)
        assert fit.adj_r2 <= fit.r2
        assert 0.0 <= fit.p_beta <= 1.0


def test_robust_se_matches_sandwich():
    rng = np.random.default_rng(5)
    for _ in range(50):
        points = _random_points(rng, int(rng.integers(5, 60)))
        fit = fit_loglog(points, robust_se=True)
        oracle = _oracle(points)
        design, resid = oracle["design"], oracle["resid"]
        n = design.shape[0]
        bread = np.linalg.inv(design.T @ design)
        meat = design.T @ (design * (resid ** 2)[:, None])
        cov = bread @ meat @ bread * n / (n - 2)
        assert fit.se_beta == pytest.approx(math.sqrt(cov[1, 1]), rel=1e-9)
        assert fit.se_intercept == pytest.approx(math.sqrt(cov[0, 0]), rel=1e-9)
        assert fit.beta == pytest.approx(oracle["beta"], rel=1e-10, abs=1e-10)


def test_unit_invariance():
    rng = np.random.default_rng(11)
    points = _random_points(rng, 30)
    base = fit_loglog(points)
    for _ in range(20):
        k = float(np.exp(rng.uniform(math.log(1e-6), math.log(1e6))))
        sized = fit_loglog([(s * k, y) for s, y in points])
        assert sized.beta == pytest.approx(base.beta, abs=1e-9)
        assert sized.r2 == pytest.approx(base.r2, abs=1e-9)
        assert sized.intercept_ln == pytest.approx(base.intercept_ln - base.beta * math.log(k), abs=1e-9)
        impacted = fit_loglog([(s, y * k) for s, y in points])
        assert impacted.beta == pytest.approx(base.beta, abs=1e-9)
        assert impacted.intercept_ln == pytest.approx(base.intercept_ln + math.log(k), abs=1e-9)
        assert impacted.regime is base.regime


def test_fit_errors():
    with pytest.raises(TooFewPoints):
        fit_loglog([(1.0, 2.0), (3.0, 4.0)])
    with pytest.raises(NonPositiveValue):
        fit_loglog([(1.0, 2.0), (3.0, 0.0), (5.0, 6.0)])
    with pytest.raises(NonPositiveValue):
        fit_loglog([(1.0, 2.0), (-3.0, 1.0), (5.0, 6.0)])
    with pytest.raises(DegenerateInput):
        fit_loglog([(10.0, 2.0), (10.0, 5.0), (10.0, 6.0)])


def test_flat_impact_has_zero_r2():
    fit = fit_loglog([(1.0, 7.0), (10.0, 7.0), (100.0, 7.0), (1000.0, 7.0)])
    assert fit.beta == pytest.approx(0.0, abs=1e-15)
    assert fit.r2 == 0.0
    assert fit.regime is ScalingRegime.Sublinear


def test_estimator_consistency_on_synthetic_population():
    spec = SyntheticSpec(
        n=5000,
        beta_true=0.94,
        intercept_ln_true=-2.0,
        noise_sd=0.5,
        size_dist=ParetoDist(x_min=1e6, alpha=1.2),
        group_key="All",
        seed=42,
    )
    sizes, impacts, _ = generate_arrays(spec)
    fit = fit_loglog(np.column_stack([sizes, impacts]))
    assert abs(fit.beta - 0.94) <= 3 * fit.se_beta
    assert fit.regime is ScalingRegime.Sublinear


def test_bootstrap_is_reproducible_and_brackets_estimate():
    rng = np.random.default_rng(3)
    sizes = 10 ** rng.uniform(3, 9, size=200)
    impacts = sizes ** 0.9 * np.exp(rng.normal(0, 0.4, size=200))
    points = np.column_stack([sizes, impacts])
    first = bootstrap_ci(points, replicates=500, seed=9)
    second = bootstrap_ci(points, replicates=500, seed=9)
    assert first == second
    beta = fit_loglog(points).beta
    assert first.low < beta < first.high
    assert first.level == 0.95 and first.replicates == 500 and first.seed == 9


def test_bootstrap_on_exact_line_has_zero_width():
    rng = np.random.default_rng(23)
    sizes = 10 ** rng.uniform(2, 8, size=40)
    impacts = np.exp(0.9 * np.log(sizes) - 1.0)
    points = np.column_stack([sizes, impacts])
    interval = bootstrap_ci(points, replicates=200, seed=4)
    assert interval.low == interval.high
    assert interval.low == pytest.approx(fit_loglog(points).beta, abs=1e-12)
    assert interval.low == pytest.approx(0.9, abs=1e-12)


def test_bootstrap_validation():
    points = [(1.0, 2.0), (10.0, 15.0), (100.0, 90.0), (1000.0, 1100.0)]
    with pytest.raises(InvalidConfig):
        bootstrap_ci(points, level=1.0)
    with pytest.raises(InvalidConfig):
        bootstrap_ci(points, replicates=99)
    with pytest.raises(InvalidConfig):
        bootstrap_ci(points, seed=-1)
    with pytest.raises(DegenerateInput):
        bootstrap_ci([(5.0, 1.0), (5.0, 2.0), (5.0, 3.0), (5.0, 4.0)], replicates=200)


@pytest.mark.slow
def test_bootstrap_coverage():
    covered = 0
    trials = 200
    for trial in range(trials):
        spec = SyntheticSpec(
            n=500,
            beta_true=0.9,
            intercept_ln_true=-2.0,
            noise_sd=0.5,
            size_dist=ParetoDist(x_min=1e6, alpha=1.2),
            group_key="All",
            seed=10_000 + trial,
        )
        sizes, impacts, _ = generate_arrays(spec)
        interval = bootstrap_ci(np.column_stack([sizes, impacts]), replicates=1000, seed=trial)
        covered += interval.low <= 0.9 <= interval.high
    assert 0.92 <= covered / trials <= 0.975


def main():
    test_classify_regime_thresholds()
    test_significance_stars()
    test_exact_power_law()
    test_three_point_hand_oracle()
    test_point_order_does_not_matter()
    test_fitted_line_minimises_squared_residuals()
    test_matches_normal_equations_oracle()
    test_robust_se_matches_sandwich()
    test_unit_invariance()
    test_fit_errors()
    test_flat_impact_has_zero_r2()
    test_estimator_consistency_on_synthetic_population()
    test_bootstrap_is_reproducible_and_brackets_estimate()
    test_bootstrap_on_exact_line_has_zero_width()
    test_bootstrap_validation()
    test_bootstrap_coverage()
    print("All tests passed.")


if __name__ == "__main__":
    main()
