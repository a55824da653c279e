"""Memo for critical points, optionally persisted on disk."""
import json
import logging
import threading
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

import diskcache

from ..core.config import config
from ..core.exceptions import CacheError
from ..core.models import CriticalData

logger = logging.getLogger(__name__)


class CriticalCache:
    """Synchronized (spec, d) -> CriticalData memo; results never depend on whether it is on."""

    def __init__(self, cache_dir: Optional[str] = None, persistent: Optional[bool] = None):
        """Initialize cache."""
        self.enabled = True
        self.persistent = config.enable_cache if persistent is None else persistent
        self.cache_dir = Path(cache_dir or config.cache_dir)
        self._memory: Dict[Tuple[Any, int], CriticalData] = {}
        self._lock = threading.Lock()

        if self.persistent:
            try:
                self.cache_dir.mkdir(parents=True, exist_ok=True)
                self._disk = diskcache.Cache(str(self.cache_dir))
            except Exception as e:
                raise CacheError(f"Failed to initialize cache: {e}")
        else:
            self._disk = None

    @staticmethod
    def disk_key(spec: Any, d: int) -> str:
        payload = json.dumps(spec.model_dump(), sort_keys=True)
        return f"beta_c:{d}:{payload}"

    def get_or_compute(self, spec: Any, d: int, compute: Callable[[], CriticalData]) -> CriticalData:
        """Return the memoized value, computing it at most once per key."""
        if not self.enabled:
            return compute()

        key = (spec, d)
        with self._lock:
            if key in self._memory:
                return self._memory[key]

            cached = self._disk_get(spec, d)
            if cached is None:
                cached = compute()
                self._disk_set(spec, d, cached)
            self._memory[key] = cached
            return cached

    def _disk_get(self, spec: Any, d: int) -> Optional[CriticalData]:
        if self._disk is None:
            return None
        try:
            data = self._disk.get(self.disk_key(spec, d))
            return CriticalData(**data) if data else None
        except Exception as e:
            logger.warning(f"Ignoring unreadable cache entry: {e}")
            return None

    def _disk_set(self, spec: Any, d: int, value: CriticalData) -> None:
        if self._disk is None:
            return
        try:
            self._disk.set(self.disk_key(spec, d), value.to_dict())
        except Exception as e:
            logger.warning(f"Failed to persist critical point: {e}")

    def clear(self) -> None:
        """Clear all cached data."""
        with self._lock:
            self._memory.clear()
            if self._disk is not None:
                try:
                    self._disk.clear()
                except Exception as e:
                    raise CacheError(f"Failed to clear cache: {e}")

    def stats(self) -> Dict[str, Any]:
        """Get cache statistics."""
        stats: Dict[str, Any] = {"enabled": self.enabled, "entries": len(self._memory),
                                 "persistent": self.persistent}
        if self._disk is not None:
            try:
                stats["disk_entries"] = len(self._disk)
                stats["disk_usage"] = self._disk.volume()
                stats["cache_dir"] = str(self.cache_dir)
            except Exception:
                stats["error"] = "Failed to get stats"
        return stats

    def reload(self) -> None:
        """Re-read persistence settings from the environment (after an env file is loaded)."""
        self.close()
        self.__init__()

    def close(self) -> None:
        """Close cache connection."""
        if self._disk is not None:
            try:
                self._disk.close()
            except Exception:
                pass


# Global cache instance
critical_cache = CriticalCache()
