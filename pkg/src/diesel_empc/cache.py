"""In-memory cache for interpolated LPV local models."""

import logging
import threading
from collections import OrderedDict
from typing import Any, Hashable, Optional

logger = logging.getLogger(__name__)


class CacheManager:
  """Lock-guarded key/value cache with least-recently-used eviction.

  Entries are evicted by count, not age: cached values are pure functions of
  their key (an LPV model identity plus an operating point).
  """

  def __init__(self, max_entries: int = 4096):
    self._cache: "OrderedDict[Hashable, Any]" = OrderedDict()
    self._lock = threading.Lock()
    self.max_entries = max_entries
    self.hits = 0
    self.misses = 0
    logger.debug(f"Initialized model cache (max_entries={max_entries})")

  def get(self, key: Hashable) -> Optional[Any]:
    """Get cached value by key."""
    with self._lock:
      if key in self._cache:
        self._cache.move_to_end(key)
        self.hits += 1
        return self._cache[key]
      self.misses += 1
      return None

  def set(self, key: Hashable, value: Any) -> bool:
    """Set cached value, evicting the least recently used entry when full."""
    with self._lock:
      self._cache[key] = value
      self._cache.move_to_end(key)
      while len(self._cache) > self.max_entries:
        self._cache.popitem(last=False)
      return True

  def delete(self, key: Hashable) -> bool:
    """Delete cached value."""
    with self._lock:
      if key in self._cache:
        del self._cache[key]
        return True
      return False

  def clear(self) -> None:
    """Clear all cached values."""
    with self._lock:
      self._cache.clear()
      self.hits = 0
      self.misses = 0

  def __len__(self) -> int:
    with self._lock:
      return len(self._cache)


# Global cache instance
cache = CacheManager()
