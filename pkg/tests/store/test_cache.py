import numpy as np
import pytest

from src.store.cache import LRUCache, query_key


def test_lru_evicts_least_recently_used():
    cache = LRUCache(2)
    cache.put("a", 1)
    cache.put("b", 2)
    assert cache.get("a") == 1
    cache.put("c", 3)
    assert "b" not in cache
    assert len(cache) == 2
    assert (cache.hits, cache.misses) == (1, 0)


def test_zero_capacity_disables_cache():
    cache = LRUCache(0)
    cache.put("a", 1)
    assert cache.get("a") is None
    assert cache.misses == 1


def test_negative_capacity_rejected():
    with pytest.raises(ValueError):
        LRUCache(-1)


def test_query_key_depends_on_generation_and_arguments():
    q = np.arange(4, dtype=np.float32)
    base = query_key(q, 5, 2, 0)
    assert base == query_key(q.copy(), 5, 2, 0)
    assert base != query_key(q, 5, 2, 1)
    assert base != query_key(q, 3, 2, 0)
    assert base != query_key(q + 1, 5, 2, 0)
