"""In-memory LRU caches with optional pickle persistence.

Keys look like ``ran:<type>:<id>``; persisted entries live under
``<cache_dir>/<directory>/<type>/<id[:2]>/``.
"""

import logging
import pickle
from collections import OrderedDict
from pathlib import Path
from typing import Any, Callable, Optional

from ran_tools import Extension, context
from ran_tools.generator import Generation, GeneratorConfig, generate

logger = logging.getLogger(__name__)


def id_to_cachef(id: str) -> Path:
    return Path(id.replace(":", "-") + ".cache")


class PickleStore:
    """One pickle file per key below ``root``."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, key: str) -> Path:
        parts = key.split(":")
        if len(parts) < 3:
            raise ValueError(f"Invalid cache key: {key}")
        _, obj_type, id, *_ = parts
        folder = self.root / obj_type / id[:2]
        folder.mkdir(parents=True, exist_ok=True)
        return folder / id_to_cachef(key)

    def load(self, key: str) -> Any:
        path = self.path(key)
        try:
            payload = path.read_bytes()
        except FileNotFoundError:
            raise KeyError(key) from None
        try:
            return pickle.loads(payload)
        except Exception as e:
            logger.warning("Dropping unreadable cache file %s: %s", path, e)
            path.unlink(missing_ok=True)
            raise KeyError(key) from e

    def save(self, key: str, value: Any):
        self.path(key).write_bytes(pickle.dumps(value, protocol=pickle.HIGHEST_PROTOCOL))

    def delete(self, key: str):
        self.path(key).unlink(missing_ok=True)


class LruCache(OrderedDict):
    def __init__(self, max_size: Optional[int] = 16, persist=False, directory=""):
        """
        :param max_size: Entries kept in memory; 0 or None means unbounded
        :param persist: Also pickle entries below the configured cache_dir
        :param directory: Subfolder of cache_dir for this cache's files
        """
        super().__init__()
        if max_size is not None and max_size < 0:
            raise ValueError(f"Invalid cache size: {max_size}")
        self._max_size = max_size or 0
        self._store = None
        if persist:
            root = Extension.get_cache_dir(context.get_config()) / directory
            self._store = PickleStore(root)

    @property
    def max_size(self):
        return self._max_size

    @property
    def persist(self):
        return self._store is not None

    def cache_file(self, key: str) -> Path:
        return self._store.path(key)

    def _remember(self, key, value):
        if super().__contains__(key):
            super().__delitem__(key)
        super().__setitem__(key, value)
        if self._max_size:
            while len(self) > self._max_size:
                self.popitem(last=False)

    def __getitem__(self, key):
        if super().__contains__(key):
            self.move_to_end(key)
            return super().__getitem__(key)
        if self._store is None:
            raise KeyError(key)
        value = self._store.load(key)
        logger.debug("Loaded %s from disk", key)
        self._remember(key, value)
        return value

    def __setitem__(self, key, value):
        self._remember(key, value)
        if self._store is not None:
            self._store.save(key, value)

    def __contains__(self, key):
        return self.get(key) is not None

    def get(self, key, default=None):
        try:
            return self[key]
        except KeyError:
            return default

    def update(self, *args, **kwargs):
        for key, value in dict(*args, **kwargs).items():
            self[key] = value

    def prune(self, *keys):
        """Forget ``keys`` in memory and on disk."""
        for key in keys:
            logger.debug("Pruning %r from %s", key, type(self).__name__)
            if self._store is not None:
                self._store.delete(key)
            if super().__contains__(key):
                super().__delitem__(key)

    def prune_all(self):
        self.prune(*list(self.keys()))


def generation_key(config: GeneratorConfig) -> str:
    return f"ran:generation:{config.t_max}-{config.seed}"


class GenerationCache(LruCache):
    """Memoizes ``generate`` per ``(t_max, seed)``."""

    def __init__(
        self,
        generate_function: Callable[[GeneratorConfig], Generation] = generate,
        max_size: Optional[int] = None,
        persist: Optional[bool] = None,
    ):
        if max_size is None:
            max_size = context.get_setting("cache_size")
        if persist is None:
            persist = context.get_setting("persist_cache")
        super().__init__(max_size=max_size, persist=persist, directory="graphs")
        self._generate_function = generate_function

    def __call__(self, config: GeneratorConfig) -> Generation:
        key = generation_key(config)
        generation = self.get(key)
        if generation is None:
            logger.debug("Generation cache miss for %s", key)
            generation = self._generate_function(config)
            self[key] = generation
        return generation
