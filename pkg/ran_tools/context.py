from ran_tools import config as _config

_ctx = {
    "config": None,
}


def set_config(cfg):
    _ctx["config"] = cfg


def get_config():
    if not _ctx["config"]:
        _ctx["config"] = _config.load()
    return _ctx["config"]


def get_setting(key: str):
    return get_config()["ran"][key]
