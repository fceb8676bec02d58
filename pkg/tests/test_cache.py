"""Tests for cache module."""

import threading

import pytest

from diesel_empc.cache import CacheManager


@pytest.fixture
def cache():
  """Fixture providing a clean CacheManager instance."""
  return CacheManager(max_entries=3)


def test_cache_set_get(cache):
  cache.set(("emissions", 1600.0, 40.0), "local model")
  assert cache.get(("emissions", 1600.0, 40.0)) == "local model"
  assert cache.get(("emissions", 1600.0, 41.0)) is None
  assert cache.hits == 1
  assert cache.misses == 1


def test_cache_evicts_least_recently_used(cache):
  for i in range(3):
    cache.set(i, i)
  assert cache.get(0) == 0  # 0 becomes most recent
  cache.set(3, 3)
  assert len(cache) == 3
  assert cache.get(1) is None
  assert cache.get(0) == 0
  assert cache.get(3) == 3


def test_cache_overwrite_keeps_size(cache):
  cache.set("a", 1)
  cache.set("a", 2)
  assert len(cache) == 1
  assert cache.get("a") == 2


def test_cache_delete(cache):
  cache.set("delete_key", "delete_value")
  assert cache.delete("delete_key") is True
  assert cache.get("delete_key") is None
  assert cache.delete("non_existent_key") is False


def test_cache_clear(cache):
  cache.set("key1", "value1")
  cache.get("key1")
  cache.clear()
  assert len(cache) == 0
  assert cache.hits == 0
  assert cache.get("key1") is None


def test_thread_safety():
  """Concurrent access never loses values and never exceeds the bound."""
  shared = CacheManager(max_entries=50)
  results = []
  lock = threading.Lock()

  def worker():
    for i in range(100):
      shared.set(f"key_{i}", i)
      value = shared.get(f"key_{i}")
      with lock:
        results.append(value)

  threads = [threading.Thread(target=worker) for _ in range(10)]
  for t in threads:
    t.start()
  for t in threads:
    t.join()

  assert len(results) == 1000
  assert len(shared) <= 50
  assert all(x is None or isinstance(x, int) for x in results)
