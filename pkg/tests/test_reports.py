import json
from fractions import Fraction

import pytest

from ran_tools.reports import (
    SCHEMA_VERSION,
    collect_stats,
    depth_csv,
    depth_to_dict,
    dump_json,
    enumeration_to_dict,
    histogram_csv,
    survival_csv,
    survival_to_dict,
)
from ran_tools.spectra import degree_histogram
from ran_tools.stochastics import enumerate_small, waiting_time_trials
from ran_tools.tree_metrics import depth_profile


@pytest.fixture
def stats(make_generation):
    return collect_stats(make_generation(100, seed=7), k=3)


def test_stats_counts(stats):
    assert stats.counts == {"n": 103, "m": 303, "faces": 201}
    assert stats.valid


def test_stats_document(stats):
    doc = json.loads(dump_json(stats.to_dict()))

    assert doc["schema"] == SCHEMA_VERSION
    assert (doc["t"], doc["seed"], doc["valid"]) == (100, 7, True)
    assert len(doc["top_k"]) == len(doc["lambdas"]) == len(doc["ratios"]) == 3
    assert doc["diameter"]["method"] == "exact"
    assert doc["diameter"]["exact"] <= 2 * doc["depth"]["tree_height"]
    assert doc["constants"]["log"] == "ln"
    assert doc["solver"]["method"] == "lanczos"
    assert "analyze_ms" in doc["timing"]


def test_stats_document_is_deterministic_without_timing(make_generation):
    a = collect_stats(make_generation(150, seed=2), k=2).to_dict(with_timing=False)
    b = collect_stats(make_generation(150, seed=2), k=2).to_dict(with_timing=False)

    assert dump_json(a) == dump_json(b)
    assert "timing" not in a


def test_stats_without_spectra(make_generation):
    doc = collect_stats(make_generation(20), k=3, spectra=False).to_dict()

    assert doc["lambdas"] is None
    assert doc["ratios"] is None
    assert "solver" not in doc


def test_k_above_vertex_count_is_rejected(make_generation):
    with pytest.raises(ValueError, match=r"k must lie in 1\.\.3, not 5"):
        collect_stats(make_generation(0), k=5)


def test_k_equal_to_vertex_count(make_generation):
    doc = collect_stats(make_generation(0), k=3).to_dict()

    assert [v["degree"] for v in doc["top_k"]] == [2, 2, 2]
    assert doc["lambdas"][0] == pytest.approx(2.0)


def test_invalid_counts_are_flagged(stats, caplog):
    stats.counts["m"] += 1

    assert not stats.valid
    assert stats.to_dict()["valid"] is False


def test_histogram_csv(make_graph):
    text = histogram_csv(degree_histogram(make_graph(1)))

    assert text == "degree,count\n3,4\n"


def test_depth_csv_and_dict(make_generation):
    profile = depth_profile(make_generation(1).genealogy)

    assert depth_csv(profile) == "depth,empirical,expected\n2,3,3.0\n"
    doc = depth_to_dict(profile, 1)
    assert doc["depths"] == [{"depth": 2, "empirical": 3, "expected": 3.0}]
    assert doc["k_star"] == 2


def test_survival_outputs():
    curve = waiting_time_trials(200, 2, seed=1)

    lines = survival_csv(curve).splitlines()
    assert lines[0] == "t,exact_num,exact_den,empirical"
    assert lines[1] == "0,1,1,1.0"
    assert lines[2].startswith("1,3,5,")
    doc = survival_to_dict(curve)
    assert [row["exact"] for row in doc["survival"]] == ["1/1", "3/5", "3/7"]
    assert doc["trials"] == 200


def test_enumeration_fractions_are_strings():
    doc = json.loads(dump_json(enumeration_to_dict(enumerate_small(2))))

    assert doc["schema"] == SCHEMA_VERSION
    assert doc["outcomes"][0]["probability"] == "1/3"


def test_dump_json_encodes_fractions():
    assert json.loads(dump_json({"p": Fraction(2, 4)})) == {"p": "1/2"}


def test_dump_json_rejects_unknown_types():
    with pytest.raises(TypeError):
        dump_json({"x": object()})
