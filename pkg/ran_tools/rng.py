"""Seeding and face sampling.

All randomness flows through numpy's PCG64 bit generator, whose algorithm is
documented and stable. Monte Carlo work is split into fixed-size batches and
batch ``i`` of a run seeded with ``seed`` draws from ``derive_seed(seed, i)``,
so results do not depend on how batches are scheduled.
"""

import logging
from typing import Callable, Iterator, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

SEED_BITS = 64

FaceSampler = Callable[[np.random.Generator, int, int, Optional[int]], np.ndarray]


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"Seed must be an integer, not {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed < 2**SEED_BITS:
        raise ValueError(f"Seed {seed} is not an unsigned {SEED_BITS}-bit integer")
    return seed


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(check_seed(seed)))


def derive_seed(seed: int, index: int) -> int:
    """Mix ``(seed, index)`` into a child seed with numpy's SeedSequence hash."""
    sequence = np.random.SeedSequence([check_seed(seed), int(index)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def face_counts(first_step: int, steps: int) -> np.ndarray:
    """Active face counts seen by steps ``first_step .. first_step+steps-1``."""
    return 2 * np.arange(first_step, first_step + steps, dtype=np.int64) - 1


def uniform_face_sampler(
    rng: np.random.Generator, first_step: int, steps: int, size: Optional[int] = None
) -> np.ndarray:
    """Draw face indices for consecutive steps.

    Step ``j`` picks an index uniformly in ``[0, 2j-1)``. numpy's bounded
    integer generation is unbiased (no modulo reduction). Returns shape
    ``(steps,)``, or ``(size, steps)`` when ``size`` is given.
    """
    shape = (steps,) if size is None else (size, steps)
    if steps == 0:
        return np.empty(shape, dtype=np.int64)
    highs = face_counts(first_step, steps)
    return rng.integers(0, highs, size=shape, dtype=np.int64)


def batches(total: int, batch_size: int) -> Iterator[Tuple[int, int]]:
    """Yield ``(batch_index, batch_len)`` covering ``total`` trials."""
    for index, start in enumerate(range(0, total, batch_size)):
        yield index, min(batch_size, total - start)
