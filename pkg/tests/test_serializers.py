import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ran_tools import kernels
from ran_tools.errors import ExportError, SnapshotFormatError
from ran_tools.generator import GeneratorConfig, generate
from ran_tools.serializers import (
    MAGIC,
    export_edges,
    import_edges,
    read_snapshot,
    write_snapshot,
)


def _edgelist(graph) -> bytes:
    sink = io.BytesIO()
    export_edges(graph, sink)
    return sink.getvalue()


def test_triangle_edge_list(make_graph):
    assert _edgelist(make_graph(0)) == b"1 2\n1 3\n2 3\n"


def test_one_step_has_six_lines(make_graph):
    assert _edgelist(make_graph(1)).count(b"\n") == 6


def test_edges_written_in_creation_order(make_graph):
    lines = _edgelist(make_graph(3, seed=2)).decode().splitlines()

    assert lines[:3] == ["1 2", "1 3", "2 3"]
    assert [line.split()[1] for line in lines[3:]] == ["4"] * 3 + ["5"] * 3 + ["6"] * 3


def test_edge_list_round_trip(make_graph):
    graph = make_graph(250, seed=9)
    first = _edgelist(graph)

    again = import_edges(io.BytesIO(first))

    assert again == graph
    assert _edgelist(again) == first


def test_edge_list_to_file(make_graph, tmp_path):
    graph = make_graph(20)
    path = tmp_path / "edges.txt"

    with open(path, "wb") as f:
        export_edges(graph, f)

    assert import_edges(path) == graph


def test_export_wraps_io_errors(make_graph, mocker):
    sink = mocker.Mock()
    sink.name = "broken.txt"
    sink.write.side_effect = OSError("disk full")

    with pytest.raises(ExportError, match="broken.txt"):
        export_edges(make_graph(2), sink)


def test_snapshot_header(make_graph):
    sink = io.BytesIO()
    write_snapshot(make_graph(5), 77, sink)

    data = sink.getvalue()
    assert data[:4] == MAGIC
    assert int.from_bytes(data[4:12], "little") == 5
    assert int.from_bytes(data[12:20], "little") == 77


def test_snapshot_round_trip(make_graph):
    graph = make_graph(1000, seed=12)
    sink = io.BytesIO()
    write_snapshot(graph, 12, sink)

    again, seed = read_snapshot(io.BytesIO(sink.getvalue()))

    assert seed == 12
    assert np.array_equal(again.edges, graph.edges)


@settings(max_examples=25, deadline=None)
@given(t=st.integers(0, 200), seed=st.integers(0, 2**64 - 1))
def test_snapshot_restores_creation_order(t, seed):
    graph = generate(GeneratorConfig(t_max=t, seed=seed)).graph
    sink = io.BytesIO()
    write_snapshot(graph, seed, sink)

    again, again_seed = read_snapshot(io.BytesIO(sink.getvalue()))

    assert again == graph
    assert again_seed == seed


class TestBadSnapshots:
    @pytest.fixture
    def payload(self, make_graph):
        sink = io.BytesIO()
        write_snapshot(make_graph(30, seed=4), 4, sink)
        return sink.getvalue()

    def test_bad_magic(self, payload):
        with pytest.raises(SnapshotFormatError, match="magic"):
            read_snapshot(io.BytesIO(b"RAN2" + payload[4:]))

    def test_short_header(self):
        with pytest.raises(SnapshotFormatError):
            read_snapshot(io.BytesIO(b"RAN1"))

    def test_truncated_payload(self, payload):
        with pytest.raises(SnapshotFormatError):
            read_snapshot(io.BytesIO(payload[:-3]))

    def test_trailing_bytes(self, payload):
        with pytest.raises(SnapshotFormatError):
            read_snapshot(io.BytesIO(payload + b"\x01"))

    def test_oversized_header_is_rejected_before_decoding(self, mocker):
        decode = mocker.patch.object(kernels, "decode_varints")
        data = struct.pack("<4sQQ", MAGIC, 10**12, 1) + b"\x02\x02\x03"

        with pytest.raises(SnapshotFormatError, match="t=1000000000000"):
            read_snapshot(io.BytesIO(data))

        decode.assert_not_called()


def test_import_rejects_repeated_edge():
    with pytest.raises(ValueError):
        import_edges(io.BytesIO(b"1 2\n" * 6))


def test_import_rejects_vertex_without_edges():
    with pytest.raises(ValueError, match="three edges"):
        import_edges(io.BytesIO(b"1 2\n1 3\n2 3\n1 4\n2 4\n3 4\n1 4\n2 4\n3 4\n"))
