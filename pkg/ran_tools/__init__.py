import logging
import os
from pathlib import Path

from mopidy import config as mopidy_config

from ran_tools.config import ByteSize

__version__ = "0.1.0"

logger = logging.getLogger(__name__)


class Extension:
    dist_name = "ran-tools"
    ext_name = "ran"
    version = __version__

    def get_default_config(self) -> str:
        conf_file = os.path.join(os.path.dirname(__file__), "ext.conf")
        return mopidy_config.read(conf_file)

    def get_config_schema(self) -> mopidy_config.ConfigSchema:
        schema = mopidy_config.ConfigSchema(self.ext_name)
        schema["memory_limit"] = ByteSize(minimum=1)
        schema["eigen_tol"] = mopidy_config.Float(minimum=0.0)
        schema["eigen_max_iterations"] = mopidy_config.Integer(minimum=1)
        schema["exact_diameter_max_vertices"] = mopidy_config.Integer(minimum=3)
        schema["default_k"] = mopidy_config.Integer(minimum=1)
        schema["default_trials"] = mopidy_config.Integer(minimum=1)
        schema["sigmas"] = mopidy_config.Float(minimum=0.0)
        schema["batch_size"] = mopidy_config.Integer(minimum=1)
        schema["workers"] = mopidy_config.Integer(minimum=1, maximum=256)
        schema["cache_size"] = mopidy_config.Integer(minimum=0)
        schema["persist_cache"] = mopidy_config.Boolean()
        schema["cache_dir"] = mopidy_config.Path(optional=True)
        schema["log_level"] = mopidy_config.String(
            choices=["DEBUG", "INFO", "WARNING", "ERROR"]
        )
        return schema

    @classmethod
    def get_cache_dir(cls, cfg) -> Path:
        cache_dir = cfg[cls.ext_name].get("cache_dir")
        if not cache_dir:
            base = os.environ.get("XDG_CACHE_HOME") or Path.home() / ".cache"
            cache_dir = Path(base, cls.dist_name)
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        return cache_dir
