import pytest

from ran_tools.errors import InvalidVertex
from ran_tools.helpers import check_label, elapsed_ms


@pytest.mark.parametrize("v, res", [(1, 1), (5, 5), (3.0, 3)])
def test_check_label_accepts_labels_in_range(v, res):
    assert check_label(v, 5) == res


@pytest.mark.parametrize("v", [0, 6, -2, 2.5, True])
def test_check_label_rejects(v):
    with pytest.raises(InvalidVertex):
        check_label(v, 5)


def test_elapsed_ms_records_time(mocker):
    mocker.patch("ran_tools.helpers.time.perf_counter", side_effect=[1.0, 1.25])
    timings = {}

    with elapsed_ms(timings, "generate"):
        pass

    assert timings == {"generate": 250.0}


def test_elapsed_ms_records_on_error():
    timings = {}

    with pytest.raises(RuntimeError):
        with elapsed_ms(timings, "boom"):
            raise RuntimeError

    assert timings["boom"] >= 0
