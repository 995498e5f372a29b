import pytest

from ran_tools.generator import generate
from ran_tools.verify import CHECKS, DEFAULT_SEEDS, DEFAULT_T_LIST, verify

CHECK_NAMES = [
    "counts",
    "euler",
    "face_adjacency",
    "step_invariants",
    "uniform_sampling",
    "oracle_equivalence",
    "survival_law",
    "censored_mean_growth",
    "moment_bound",
    "degree_order",
    "spectral_closed_forms",
    "lambda_vs_degree",
    "diameter_vs_height",
    "diameter_bounds",
    "depth_recursion",
    "constants",
]


def test_checks_are_registered_once_in_order():
    assert [name for name, _ in CHECKS] == CHECK_NAMES


def test_defaults():
    assert DEFAULT_T_LIST == (0, 1, 2, 10, 100, 1000)
    assert DEFAULT_SEEDS == (1, 2, 3, 4, 5)


def test_only_restricts_the_run():
    run = verify([0, 5], [1], only=["counts", "constants"])

    assert [r.name for r in run.results] == ["counts", "constants"]
    assert run.passed


def test_unknown_check_is_rejected():
    with pytest.raises(ValueError, match="Unknown checks"):
        verify([1], [1], only=["flux"])


def test_needs_a_seed():
    with pytest.raises(ValueError, match="seed"):
        verify([1], [])


def test_structural_checks_pass():
    run = verify(
        [0, 1, 2, 10, 100],
        [1, 2, 3],
        only=["counts", "euler", "face_adjacency", "step_invariants", "degree_order"],
    )

    assert run.passed, run.table()


def test_generations_come_from_the_cache(mocker):
    cache = mocker.MagicMock()
    cache.side_effect = generate

    verify([3], [1, 2], cache=cache, only=["counts"])

    assert cache.call_count == 2


def test_table_lists_every_result():
    run = verify([1], [1], only=["counts", "constants"])

    table = run.table()

    assert "counts" in table
    assert table.count("PASS") == 2


def test_biased_sampler_fails_uniform_sampling(biased_sampler):
    run = verify([2], [1], trials=20000, sampler=biased_sampler, only=["uniform_sampling"])

    assert not run.passed
    assert run.results[0].name == "uniform_sampling"
    assert "max |z|" in run.results[0].detail


def test_biased_sampler_keeps_structure_intact(biased_sampler):
    run = verify(
        [0, 1, 10, 50],
        [1, 2],
        sampler=biased_sampler,
        only=["counts", "euler", "face_adjacency", "step_invariants"],
    )

    assert run.passed


@pytest.mark.statistical
def test_biased_sampler_fails_oracle_equivalence(biased_sampler):
    run = verify([1], [1], trials=100_000, sampler=biased_sampler, only=["oracle_equivalence"])

    assert not run.passed


@pytest.mark.statistical
@pytest.mark.slow
def test_full_battery_passes():
    run = verify([0, 1, 2, 10, 100], [1, 2], trials=20000)

    assert [r.name for r in run.results] == CHECK_NAMES
    assert run.passed, run.table()
