import numpy as np
import pytest

from ran_tools.rng import (
    batches,
    check_seed,
    derive_seed,
    face_counts,
    make_rng,
    uniform_face_sampler,
)


def test_face_counts():
    assert face_counts(1, 4).tolist() == [1, 3, 5, 7]


def test_sampler_stays_in_range():
    draws = uniform_face_sampler(make_rng(3), 1, 50, size=2000)

    assert draws.shape == (2000, 50)
    assert draws.min() == 0
    assert np.all(draws < face_counts(1, 50))
    assert np.all(draws[:, 0] == 0)


def test_sampler_without_size_is_one_sequence():
    assert uniform_face_sampler(make_rng(3), 5, 7).shape == (7,)


def test_sampler_handles_zero_steps():
    assert uniform_face_sampler(make_rng(3), 1, 0, size=4).shape == (4, 0)


def test_same_seed_same_draws():
    a = uniform_face_sampler(make_rng(42), 1, 100)
    b = uniform_face_sampler(make_rng(42), 1, 100)

    assert np.array_equal(a, b)


def test_derived_seeds_are_stable_and_distinct():
    seeds = [derive_seed(7, i) for i in range(100)]

    assert seeds == [derive_seed(7, i) for i in range(100)]
    assert len(set(seeds)) == 100
    assert all(0 <= s < 2**64 for s in seeds)
    assert derive_seed(7, 0) != derive_seed(8, 0)


@pytest.mark.parametrize("seed", [-1, 2**64, 1.0, True, None])
def test_check_seed_rejects(seed):
    with pytest.raises((TypeError, ValueError)):
        check_seed(seed)


def test_check_seed_accepts_numpy_integers():
    assert check_seed(np.uint64(2**63)) == 2**63


@pytest.mark.parametrize(
    "total, size, expected",
    [
        (10, 4, [(0, 4), (1, 4), (2, 2)]),
        (8, 4, [(0, 4), (1, 4)]),
        (3, 100, [(0, 3)]),
    ],
)
def test_batches(total, size, expected):
    assert list(batches(total, size)) == expected
