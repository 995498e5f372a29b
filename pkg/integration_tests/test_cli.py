import pytest


def test_generate_edge_list(spawn, ran_tools):
    with spawn(f"{ran_tools} generate --t 100 --seed 7 --format edgelist") as child:
        child.expect("1 2\r\n1 3\r\n2 3\r\n")
        assert child.exitstatus() == 0


def test_constants(spawn, ran_tools):
    with spawn(f"{ran_tools} constants") as child:
        child.expect('"eta": 3.2893')
        assert child.exitstatus() == 0


@pytest.mark.parametrize(
    "args", ["generate --bogus", "stats --t 10", "eigen --seed 1"]
)
def test_usage_errors_exit_two(spawn, ran_tools, args):
    with spawn(f"{ran_tools} {args}") as child:
        child.expect("error")
        assert child.exitstatus() == 2


def test_verbose_logging_goes_to_stderr(spawn, ran_tools):
    with spawn(f"{ran_tools} stats --t 200 --seed 3 -v") as child:
        child.expect("DEBUG")
        child.expect('"valid": true', timeout=60)
        assert child.exitstatus(timeout=60) == 0


def test_quick_verify(spawn, ran_tools):
    # Rows of checks that do not sample, in table order.
    exact_rows = [
        "counts",
        "euler",
        "face_adjacency",
        "step_invariants",
        "degree_order",
        "spectral_closed_forms",
        "lambda_vs_degree",
        "diameter_vs_height",
        "diameter_bounds",
        "constants",
    ]
    with spawn(
        f"{ran_tools} verify --t 0 1 10 --seed 1 --trials 20000", timeout=600
    ) as child:
        child.expect(r"check\s+result\s+detail", timeout=600)
        for row in exact_rows:
            child.expect(rf"{row}\s+PASS")
        assert child.exitstatus() == 0
