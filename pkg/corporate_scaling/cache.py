import logging
import threading
from hashlib import sha256

import numpy as np
from cachetools import LRUCache

from .models import FitResult
from .regress import Points, fit_loglog

logger = logging.getLogger(__name__)


def create_fit_cache(max_size=256):
    """
    Create and return an LRU cache for fitted groups.

    Args:
        max_size (int): Maximum number of fits kept.
    Returns:
        LRUCache: An instance of LRUCache with the specified maximum size.
    """
    return LRUCache(maxsize=max_size)


class FitCache:
    """Memoises ``fit_loglog`` keyed by the exact points and the SE flavour."""

    def __init__(self, cache_size=256):
        self.cache = create_fit_cache(max_size=cache_size)
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def _hash(self, points: Points, robust_se: bool) -> str:
        """SHA-256 over the raw float bytes, so identical samples share one entry."""
        data = np.ascontiguousarray(np.asarray(points, dtype=float))
        digest = sha256(data.tobytes())
        digest.update(repr(data.shape).encode())
        digest.update(b"hc1" if robust_se else b"classical")
        return digest.hexdigest()

    def get_data(self, key):
        with self._lock:
            return self.cache.get(key)

    def set_data(self, key, value):
        with self._lock:
            self.cache[key] = value

    def fit(self, points: Points, robust_se: bool = False) -> FitResult:
        key = self._hash(points, robust_se)
        cached = self.get_data(key)
        with self._lock:
            if cached is not None:
                self.hits += 1
                return cached
            self.misses += 1
        result = fit_loglog(points, robust_se=robust_se)
        self.set_data(key, result)
        return result

    def cache_info(self) -> dict[str, int]:
        info = {
            "size": len(self.cache),
            "maxsize": int(self.cache.maxsize),
            "hits": self.hits,
            "misses": self.misses,
        }
        logger.debug("Fit cache: %s", info)
        return info
