import time
from contextlib import contextmanager

from ran_tools.errors import InvalidVertex


@contextmanager
def elapsed_ms(timings: dict, key: str):
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[key] = round((time.perf_counter() - start) * 1000.0, 3)


def check_label(v, n: int) -> int:
    if isinstance(v, bool) or int(v) != v:
        raise InvalidVertex(f"Vertex label must be an integer, not {v!r}")
    v = int(v)
    if not 1 <= v <= n:
        raise InvalidVertex(f"Vertex label {v} outside 1..{n}")
    return v
