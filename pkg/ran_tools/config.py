"""Loading the ``[ran]`` configuration.

Value types come from ``mopidy.config``. The default configuration ships as
``ext.conf`` next to this module, users can layer their own files on top of
it, and ``RAN_MEM_LIMIT`` (bytes, unit suffix allowed) overrides the
generation memory budget.
"""

import configparser
import logging
import os
import re
from typing import Iterable, Mapping, Optional

from mopidy.config import types, validators

logger = logging.getLogger(__name__)

MEM_LIMIT_ENV = "RAN_MEM_LIMIT"

_SIZE_UNITS = {
    "": 1,
    "B": 1,
    "KB": 1000,
    "MB": 1000**2,
    "GB": 1000**3,
    "KIB": 1024,
    "MIB": 1024**2,
    "GIB": 1024**3,
    "TIB": 1024**4,
}
_SIZE_RE = re.compile(r"^(\d+)\s*([a-zA-Z]*)$")


class ByteSize(types.Integer):
    """Integer byte count, optionally with a unit suffix such as ``8GiB``."""

    def deserialize(self, value):
        value = types.decode(value).strip()
        validators.validate_required(value, self._required)
        if not value:
            return None
        match = _SIZE_RE.match(value)
        if not match or match.group(2).upper() not in _SIZE_UNITS:
            raise ValueError(f"invalid byte size {value!r}")
        size = int(match.group(1)) * _SIZE_UNITS[match.group(2).upper()]
        validators.validate_minimum(size, self._minimum)
        validators.validate_maximum(size, self._maximum)
        return size

    def serialize(self, value, display=False):
        return "" if value is None else str(value)


class ConfigError(ValueError):
    pass


def load(files: Iterable = (), env: Optional[Mapping[str, str]] = None) -> dict:
    """Merge ``ext.conf``, any user files and the environment into a config."""
    from ran_tools import Extension

    ext = Extension()
    schema = ext.get_config_schema()
    parser = configparser.RawConfigParser()
    parser.read_string(ext.get_default_config())
    for conf_file in files:
        logger.debug("Loading config from %s", conf_file)
        with open(conf_file) as f:
            parser.read_file(f)

    raw = {}
    for key, value in parser.items(ext.ext_name):
        if key in schema:
            raw[key] = value
        else:
            logger.warning("Unknown config key %s/%s ignored", ext.ext_name, key)
    env = os.environ if env is None else env
    if env.get(MEM_LIMIT_ENV):
        raw["memory_limit"] = env[MEM_LIMIT_ENV]

    section, errors = schema.deserialize(raw)
    if errors:
        details = ", ".join(f"{k}: {v}" for k, v in sorted(errors.items()))
        raise ConfigError(f"Invalid [{ext.ext_name}] config: {details}")
    return {ext.ext_name: section}
