import io
import json

import pytest

from ran_tools import __version__, cli
from ran_tools.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, RunSpec, build_parser, run_cli
from ran_tools.serializers import read_snapshot


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    monkeypatch.delenv("RAN_MEM_LIMIT", raising=False)
    monkeypatch.setenv("XDG_CACHE_HOME", str(tmp_path))


def run(*argv):
    stdout, stderr = io.StringIO(), io.StringIO()
    code = run_cli(list(argv), stdout=stdout, stderr=stderr)
    return code, stdout.getvalue(), stderr.getvalue()


def test_generate_edgelist():
    code, out, _ = run("generate", "--t", "100", "--seed", "7", "--format", "edgelist")

    lines = out.splitlines()
    assert code == EXIT_OK
    assert len(lines) == 303
    assert lines[:3] == ["1 2", "1 3", "2 3"]
    assert all(len(line.split()) == 2 for line in lines)


def test_generate_is_deterministic():
    argv = ("generate", "--t", "500", "--seed", "3", "--format", "edgelist")

    assert run(*argv)[1] == run(*argv)[1]


def test_generate_json_and_csv():
    code, out, _ = run("generate", "--t", "2", "--seed", "1")
    doc = json.loads(out)

    assert code == EXIT_OK
    assert doc["counts"] == {"n": 5, "m": 9, "faces": 5}
    assert len(doc["edges"]) == 9

    _, csv_out, _ = run("generate", "--t", "2", "--seed", "1", "--format", "csv")
    assert csv_out.splitlines()[0] == "u,v"
    assert len(csv_out.splitlines()) == 10


def test_generate_binary_to_file(tmp_path):
    target = tmp_path / "g.ran"

    code, out, _ = run(
        "generate", "--t", "40", "--seed", "9", "--format", "binary", "--output", str(target)
    )

    assert code == EXIT_OK
    assert out == ""
    with open(target, "rb") as f:
        graph, seed = read_snapshot(f)
    assert (graph.t, seed) == (40, 9)


def test_unwritable_output_is_a_runtime_error(tmp_path):
    code, _, err = run(
        "constants", "--output", str(tmp_path / "missing" / "dir" / "c.json")
    )

    assert code == EXIT_FAILURE
    assert "Could not write" in err


def test_constants():
    code, out, _ = run("constants")
    doc = json.loads(out)

    assert code == EXIT_OK
    assert 3.2892 < doc["eta"] < 3.2894
    assert doc["log"] == "ln"


def test_stats():
    code, out, _ = run("stats", "--t", "300", "--seed", "2", "--k", "2")
    doc = json.loads(out)

    assert code == EXIT_OK
    assert doc["valid"]
    assert doc["counts"]["n"] == 303
    assert len(doc["lambdas"]) == 2
    assert doc["d_min"] == 10
    assert "degree_window" in doc
    assert {"generate_ms", "analyze_ms"} <= set(doc["timing"])


def test_stats_csv_histogram():
    code, out, _ = run("stats", "--t", "1", "--seed", "2", "--format", "csv", "--no-spectra")

    assert code == EXIT_OK
    assert out == "degree,count\n3,4\n"


def test_eigen_small_graph_has_no_decomposition():
    code, out, _ = run("eigen", "--t", "1", "--seed", "1", "--k", "1")
    doc = json.loads(out)

    assert code == EXIT_OK
    assert doc["lambdas"][0] == pytest.approx(3.0)
    assert doc["h_ratio"] is None


def test_diameter_with_pairs():
    code, out, _ = run("diameter", "--t", "200", "--seed", "4", "--pairs", "50")
    doc = json.loads(out)

    assert code == EXIT_OK
    assert doc["diameter"]["method"] == "exact"
    assert doc["typical_distance"]["pairs"] == 50
    assert doc["height"]["height"] == doc["diameter"]["tree_height"]


def test_depth_csv():
    code, out, _ = run("depth", "--t", "1", "--seed", "1", "--format", "csv")

    assert code == EXIT_OK
    assert out == "depth,empirical,expected\n2,3,3.0\n"


def test_waiting_json():
    code, out, _ = run("waiting", "--seed", "5", "--trials", "500", "--cutoff", "3")
    doc = json.loads(out)

    assert code == EXIT_OK
    assert [row["t"] for row in doc["survival"]] == [0, 1, 2, 3]
    assert doc["seed"] == 5


def test_verify_json_subset(mocker):
    spy = mocker.spy(cli, "verify")

    code, out, _ = run(
        "verify", "--t", "0", "1", "5", "--seed", "1", "2", "--trials", "2000", "--format", "json"
    )

    assert spy.call_args.args[:2] == ([0, 1, 5], [1, 2])
    assert json.loads(out)["passed"] is (code == EXIT_OK)


def test_verify_failure_exits_one(mocker):
    failed = mocker.Mock(passed=False, results=[])
    failed.table.return_value = "check  result\n"
    mocker.patch.object(cli, "verify", return_value=failed)

    code, out, _ = run("verify", "--seed", "1")

    assert code == EXIT_FAILURE
    assert out.startswith("check")


@pytest.mark.parametrize(
    "argv",
    [
        ("generate", "--bogus"),
        ("generate", "--t", "10"),
        ("generate", "--seed", "1"),
        ("generate", "--t", "-3", "--seed", "1"),
        ("stats", "--t", "10", "--seed", "1", "--format", "binary"),
        ("stats", "--t", "10", "20", "--seed", "1"),
        ("waiting", "--seed", "1", "--cutoff", "-1"),
        ("eigen", "--t", "10", "--seed", "1", "--tol", "0"),
        ("constants", "--format", "yaml"),
        ("stats", "--t", "0", "--seed", "1", "--k", "4"),
        ("eigen", "--t", "2", "--seed", "1", "--k", "6"),
        (),
    ],
)
def test_usage_errors(argv, capsys):
    code, out, err = run(*argv)

    assert code == EXIT_USAGE
    assert "usage:" in err
    assert out == ""
    assert capsys.readouterr().err == ""


def test_k_above_vertex_count_is_explained():
    _, _, err = run("eigen", "--t", "1", "--seed", "1", "--k", "5")

    assert "--k 5 exceeds the 4 vertices at t=1" in err


def test_k_equal_to_vertex_count_is_accepted():
    code, out, _ = run("eigen", "--t", "1", "--seed", "1", "--k", "4")

    assert code == EXIT_OK
    assert len(json.loads(out)["top_k"]) == 4


def test_missing_seed_is_explained():
    _, _, err = run("diameter", "--t", "10")

    assert "needs --seed" in err


def test_memory_limit_from_environment(monkeypatch):
    monkeypatch.setenv("RAN_MEM_LIMIT", "1000")

    code, _, err = run("generate", "--t", "100000", "--seed", "1")

    assert code == EXIT_FAILURE
    assert "memory budget" in err


def test_config_file_is_applied(tmp_path):
    conf_file = tmp_path / "ran.conf"
    conf_file.write_text("[ran]\nexact_diameter_max_vertices = 10\n")

    _, out, _ = run("diameter", "--t", "50", "--seed", "1", "--config", str(conf_file))

    assert json.loads(out)["diameter"]["method"] == "double-sweep"


def test_bad_config_file_is_a_usage_error(tmp_path):
    conf_file = tmp_path / "ran.conf"
    conf_file.write_text("[ran]\nworkers = none\n")

    assert run("constants", "--config", str(conf_file))[0] == EXIT_USAGE


def test_version_goes_to_given_stdout(capsys):
    code, out, _ = run("--version")

    assert code == EXIT_OK
    assert out.strip() == __version__
    assert capsys.readouterr().out == ""


class TestRunSpec:
    def parse(self, *argv):
        return RunSpec.from_args(build_parser().parse_args(list(argv)))

    def test_verify_defaults(self):
        spec = self.parse("verify", "--seed", "3")

        assert spec.t_list == [0, 1, 2, 10, 100, 1000]
        assert spec.seed_list == [3]
        assert spec.resolved_format == "table"

    def test_single_values(self):
        spec = self.parse("stats", "--t", "10", "--seed", "4", "--k", "2")

        assert (spec.t, spec.seed, spec.k) == (10, 4, 2)
        assert spec.resolved_format == "json"
        spec.validate()
