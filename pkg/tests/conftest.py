import numpy as np
import pytest

from ran_tools import context
from ran_tools.generator import GeneratorConfig, RanProcess, generate


@pytest.fixture(autouse=True)
def config(tmp_path):
    """Set up config.

    This fixture sets up config in context and removes it after the test.  It
    yields the config dictionary, so if you edit the dictionary you are editing
    the config.
    """

    cfg = {
        "ran": {
            "memory_limit": 1 << 30,
            "eigen_tol": 1e-8,
            "eigen_max_iterations": 10000,
            "exact_diameter_max_vertices": 20000,
            "default_k": 3,
            "default_trials": 20000,
            "sigmas": 4.0,
            "batch_size": 4096,
            "workers": 2,
            "cache_size": 8,
            "persist_cache": False,
            "cache_dir": str(tmp_path),
            "log_level": "WARNING",
        },
    }
    context.set_config(cfg)
    yield cfg
    context.set_config(None)


@pytest.fixture
def make_generation():
    def _make(t: int, seed: int = 1, **kwargs):
        return generate(GeneratorConfig(t_max=t, seed=seed), **kwargs)

    return _make


@pytest.fixture
def make_graph(make_generation):
    return lambda t, seed=1: make_generation(t, seed).graph


@pytest.fixture
def run_choices():
    """Grow a process along an explicit sequence of face choices."""

    def _run(choices):
        process = RanProcess(len(choices))
        process.run(np.asarray(choices, dtype=np.int64))
        return process

    return _run


@pytest.fixture
def biased_sampler():
    """Picks face 0 twice as often as it should, never out of range."""

    def sampler(rng, first_step, steps, size=None):
        shape = (steps,) if size is None else (size, steps)
        highs = 2 * np.arange(first_step, first_step + steps, dtype=np.int64) - 1
        draws = rng.integers(0, highs, size=shape, dtype=np.int64)
        favour = rng.random(shape) < 1 / highs
        return np.where(favour, 0, draws)

    return sampler
