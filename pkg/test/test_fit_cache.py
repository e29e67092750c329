from corporate_scaling import FitCache
from corporate_scaling.cache import create_fit_cache
from corporate_scaling.regress import fit_loglog
import numpy as np
import pytest


def _points(seed=0, n=40):
    rng = np.random.default_rng(seed)
    sizes = 10 ** rng.uniform(2, 8, size=n)
    impacts = 0.5 * sizes ** 0.9 * np.exp(rng.normal(0, 0.3, size=n))
    return list(zip(sizes.tolist(), impacts.tolist()))


def test_fit_cache_initialization():
    cache = FitCache(cache_size=100)
    assert cache.cache.maxsize == 100
    assert len(cache.cache) == 0


def test_create_fit_cache_evicts_least_recent():
    cache = create_fit_cache(max_size=2)
    cache["a"] = 1
    cache["b"] = 2
    assert cache["a"] == 1
    cache["c"] = 3
    assert "b" not in cache
    assert set(cache) == {"a", "c"}


def test_fit_cache_set_and_get_data():
    cache = FitCache(cache_size=2)
    cache.set_data("key1", "value1")
    cache.set_data("key2", "value2")
    assert cache.get_data("key1") == "value1"
    assert cache.get_data("missing") is None


def test_fit_cache_returns_same_fit():
    cache = FitCache(cache_size=8)
    points = _points()
    first = cache.fit(points)
    second = cache.fit(points)
    assert first == fit_loglog(points)
    assert second is first
    assert cache.cache_info()["hits"] == 1
    assert cache.cache_info()["misses"] == 1


def test_fit_cache_keys_on_se_flavour_and_points():
    cache = FitCache(cache_size=8)
    points = _points()
    classical = cache.fit(points)
    robust = cache.fit(points, robust_se=True)
    assert classical.beta == pytest.approx(robust.beta)
    assert cache._hash(points, False) != cache._hash(points, True)
    assert cache._hash(points, False) != cache._hash(_points(seed=1), False)
    assert cache.cache_info()["size"] == 2


def main():
    test_fit_cache_initialization()
    test_create_fit_cache_evicts_least_recent()
    test_fit_cache_set_and_get_data()
    test_fit_cache_returns_same_fit()
    test_fit_cache_keys_on_se_flavour_and_points()
    print("All tests passed.")


if __name__ == "__main__":
    main()
