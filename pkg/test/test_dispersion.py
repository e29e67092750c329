import json
import math

from corporate_scaling.dispersion import country_counts, country_dispersion, country_map_values, residual_total
from corporate_scaling.models import BenchmarkScore, CompanyRecord
from corporate_scaling.report import render_dispersion
import numpy as np
import pytest


def _score(company_id, residual, ratio=None):
    return BenchmarkScore(
        company_id=company_id,
        group_key="G",
        size_value=1.0,
        actual_impact=1.0,
        predicted_impact=1.0,
        residual_ln=residual,
        ratio=math.exp(residual) if ratio is None else ratio,
    )


def _records(countries):
    return [CompanyRecord(company_id=company_id, country=country) for company_id, country in countries.items()]


def test_pooled_sd_and_flags():
    residuals = {"A": 2.0, "B": 2.0, "C": -0.5, "D": -0.5, "E": -0.5, "F": -0.5}
    countries = {"A": "NL", "B": "NL", "C": "DE", "D": "DE", "E": "FR", "F": "FR"}
    report = country_dispersion([_score(k, v) for k, v in residuals.items()], _records(countries))
    values = np.array(list(residuals.values()))
    pooled = float(np.sqrt(np.mean((values - values.mean()) ** 2)))
    assert report.pooled_sd == pytest.approx(pooled)
    assert [stats.country for stats in report.countries] == ["NL", "DE", "FR"]
    nl = report.countries[0]
    assert nl.mean_residual_ln == pytest.approx(2.0)
    assert nl.sd_residual_ln == 0.0
    assert nl.cv == pytest.approx(0.0)
    assert nl.beyond_one_sd
    assert not report.countries[1].beyond_one_sd
    assert report.n_flagged == 1
    assert residual_total(report) == pytest.approx(float(values.sum()))


def test_cv_is_none_for_vanishing_ratio_mean():
    scores = [_score("A", -30.0, ratio=1e-13), _score("B", -30.0, ratio=2e-13)]
    report = country_dispersion(scores, _records({"A": "JP", "B": "JP"}))
    assert report.countries[0].cv is None


def test_cv_uses_population_sd_of_ratios():
    scores = [_score("A", math.log(1.0)), _score("B", math.log(3.0))]
    report = country_dispersion(scores, _records({"A": "US", "B": "US"}))
    assert report.countries[0].cv == pytest.approx(1.0 / 2.0)


def test_unknown_country_is_reported():
    scores = [_score("A", 0.1), _score("B", -0.1), _score("C", 0.3)]
    report = country_dispersion(scores, _records({"A": "CH", "B": "CH", "C": ""}))
    assert report.unknown == ["C"]
    assert sum(stats.n for stats in report.countries) == 2


def test_no_known_countries():
    report = country_dispersion([_score("A", 0.1)], _records({"A": ""}))
    assert report.countries == []
    assert report.pooled_sd == 0.0


def test_map_data():
    records = _records({"A": "DE", "B": "DE", "C": "AT", "D": ""})
    assert country_counts(records) == [("AT", 1), ("DE", 2)]
    report = country_dispersion([_score("A", 1.0), _score("C", -1.0)], records)
    assert country_map_values(report) == [("AT", -1.0), ("DE", 1.0)]


def test_flags_invariant_under_unit_rescaling():
    rng = np.random.default_rng(4)
    residuals = rng.normal(0, 1, size=40)
    countries = {f"C{i}": ["DE", "FR", "IT", "NL"][i % 4] for i in range(40)}
    scores = [_score(f"C{i}", float(r)) for i, r in enumerate(residuals)]
    base = country_dispersion(scores, _records(countries))
    scaled = [score.model_copy(update={"actual_impact": score.actual_impact * 1e6, "predicted_impact": score.predicted_impact * 1e6}) for score in scores]
    again = country_dispersion(scaled, _records(countries))
    assert [s.beyond_one_sd for s in again.countries] == [s.beyond_one_sd for s in base.countries]


def _two_countries(first, second):
    residuals = {"A": first, "B": first, "C": second, "D": second}
    countries = {"A": "NL", "B": "NL", "C": "DE", "D": "DE"}
    return country_dispersion([_score(k, v) for k, v in residuals.items()], _records(countries))


def test_symmetric_countries_sit_exactly_on_the_pooled_sd():
    report = _two_countries(1.0, -1.0)
    assert report.pooled_sd == 1.0
    assert report.n_flagged == 0
    assert _two_countries(2.0, -2.0).n_flagged == 0


def test_one_country_beyond_the_pooled_sd():
    report = _two_countries(3.0, -1.0)
    assert report.pooled_sd == pytest.approx(2.0)
    assert report.n_flagged == 1
    assert report.countries[0].country == "NL"
    assert report.countries[0].beyond_one_sd
    assert not report.countries[1].beyond_one_sd


def test_json_rendering_carries_map_values():
    report = _two_countries(3.0, -1.0)
    payload = json.loads(render_dispersion(report, fmt="json"))
    assert payload["map_values"] == [[country, value] for country, value in country_map_values(report)]
    assert payload["map_values"][0][0] == "DE"


def main():
    test_pooled_sd_and_flags()
    test_cv_is_none_for_vanishing_ratio_mean()
    test_cv_uses_population_sd_of_ratios()
    test_unknown_country_is_reported()
    test_no_known_countries()
    test_map_data()
    test_flags_invariant_under_unit_rescaling()
    test_symmetric_countries_sit_exactly_on_the_pooled_sd()
    test_one_country_beyond_the_pooled_sd()
    test_json_rendering_carries_map_values()
    print("All tests passed.")


if __name__ == "__main__":
    main()
