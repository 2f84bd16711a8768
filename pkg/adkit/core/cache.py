"""Disk feature cache.

This module caches backbone outputs on disk, keyed by a hash of the backbone
spec and the preprocessed image bytes. The cache directory comes from
``ADKIT_CACHE``; when it is unset every lookup misses and nothing is written.
"""

import functools
import hashlib
import logging
import os
import tempfile
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel

logger = logging.getLogger(__name__)

CacheKeyType = Union[str, int, float, bool, bytes, np.ndarray, BaseModel, Enum, None]
CacheValue = Dict[str, np.ndarray]


class FeatureCache:
    """Directory-backed cache of named numpy arrays.

    One process-wide instance is shared by every command; it must be
    initialized with a directory before it stores anything.
    """

    _instance: Optional["FeatureCache"] = None
    _directory: Optional[Path] = None
    _initialized: bool = False

    def __new__(cls) -> "FeatureCache":
        """Create a singleton instance of FeatureCache.

        Returns:
            FeatureCache: The singleton instance
        """
        if cls._instance is None:
            cls._instance = super(FeatureCache, cls).__new__(cls)
        return cls._instance

    def initialize(self, directory: Optional[Union[str, Path]]) -> None:
        """Point the cache at a directory, creating it if needed.

        Args:
            directory: Cache directory; ``None`` leaves the cache disabled
        """
        if directory is None:
            self.close()
            return
        self._directory = Path(directory)
        self._directory.mkdir(parents=True, exist_ok=True)
        self._initialized = True
        logger.info(f"Feature cache initialized at {self._directory}")

    def close(self) -> None:
        """Disable the cache."""
        if self._initialized:
            logger.info("Feature cache closed")
        self._directory = None
        self._initialized = False

    @property
    def enabled(self) -> bool:
        return self._initialized

    @property
    def directory(self) -> Path:
        """Get the cache directory.

        Raises:
            RuntimeError: If the cache is not initialized
        """
        if not self._initialized or self._directory is None:
            raise RuntimeError("Feature cache is not initialized")
        return self._directory

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.npz"

    def get(self, key: str) -> Optional[CacheValue]:
        """Get arrays from the cache.

        Args:
            key: Cache key

        Returns:
            Cached arrays or None if not found or unreadable
        """
        if not self._initialized:
            return None
        path = self._path(key)
        if not path.is_file():
            return None
        try:
            with np.load(path, allow_pickle=False) as archive:
                return {name: archive[name] for name in archive.files}
        except Exception as e:
            logger.error(f"Error reading cache entry {path}: {e}")
            return None

    def set(self, key: str, value: CacheValue) -> bool:
        """Store arrays in the cache.

        Args:
            key: Cache key
            value: Named arrays

        Returns:
            bool: True if successful, False otherwise
        """
        if not self._initialized:
            return False
        path = self._path(key)
        try:
            fd, tmp_name = tempfile.mkstemp(prefix=f".{key}.", dir=self.directory)
            with os.fdopen(fd, "wb") as handle:
                np.savez(handle, **value)
            os.replace(tmp_name, path)
            return True
        except Exception as e:
            logger.error(f"Error writing cache entry {path}: {e}")
            return False

    def delete(self, key: str) -> bool:
        """Delete an entry.

        Args:
            key: Cache key

        Returns:
            bool: True if an entry was removed
        """
        if not self._initialized:
            return False
        path = self._path(key)
        if path.is_file():
            path.unlink()
            return True
        return False

    def exists(self, key: str) -> bool:
        """Check if a key exists in the cache."""
        return self._initialized and self._path(key).is_file()

    def clear_all(self) -> int:
        """Remove every entry.

        Returns:
            int: Number of entries deleted
        """
        if not self._initialized:
            return 0
        removed = 0
        for path in self.directory.glob("*.npz"):
            path.unlink()
            removed += 1
        return removed


# Create a global feature cache instance
feature_cache = FeatureCache()


def generate_cache_key(prefix: str, *args: CacheKeyType, **kwargs: CacheKeyType) -> str:
    """Generate a cache key from arguments.

    Args:
        prefix: Key prefix
        *args: Positional arguments to include in the key
        **kwargs: Keyword arguments to include in the key

    Returns:
        str: Generated cache key
    """
    digest = hashlib.md5(prefix.encode())

    def update(part: CacheKeyType) -> None:
        if isinstance(part, np.ndarray):
            array = np.ascontiguousarray(part)
            digest.update(f"{array.dtype.str}{array.shape}".encode())
            digest.update(array.tobytes())
        elif isinstance(part, bytes):
            digest.update(part)
        elif isinstance(part, BaseModel):
            digest.update(part.model_dump_json().encode())
        elif isinstance(part, Enum):
            digest.update(str(part.value).encode())
        elif hasattr(part, "cache_identity"):
            # Encoders are keyed by their spec, not by object identity
            update(part.cache_identity)
            return
        else:
            digest.update(repr(part).encode())
        digest.update(b"\x00")

    for arg in args:
        update(arg)

    # Keyword arguments are sorted for consistency
    for k in sorted(kwargs):
        digest.update(k.encode())
        update(kwargs[k])

    return f"{prefix}-{digest.hexdigest()}"


def cache(prefix: Optional[str] = None) -> Callable:
    """Decorator caching a function that returns a tuple of numpy arrays.

    Every argument takes part in the key, so the decorated function must be
    a pure function of its arguments.

    Args:
        prefix: Cache key prefix (None for function name)

    Returns:
        Decorated function
    """

    def decorator(func: Callable[..., Tuple[np.ndarray, ...]]) -> Callable:
        func_prefix = prefix or func.__name__

        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Tuple[np.ndarray, ...]:
            # Skip caching if the cache is not initialized
            if not feature_cache.enabled:
                return func(*args, **kwargs)

            cache_key = generate_cache_key(func_prefix, *args, **kwargs)
            cached = feature_cache.get(cache_key)
            if cached is not None:
                logger.debug(f"Cache hit for key: {cache_key}")
                return tuple(cached[f"arr_{i}"] for i in range(len(cached)))

            logger.debug(f"Cache miss for key: {cache_key}")
            result = func(*args, **kwargs)
            feature_cache.set(cache_key, {f"arr_{i}": a for i, a in enumerate(result)})
            return result

        return wrapper

    return decorator

