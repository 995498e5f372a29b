"""Graph artifacts: the ``u v`` edge list and the ``RAN1`` binary snapshot.

Snapshot layout: ``b"RAN1"``, ``t`` and ``seed`` as little-endian u64, then
for every vertex in label order a varint degree followed by its sorted
neighbour labels, delta-encoded (the first label is written as is).
"""

import logging
import struct
from typing import BinaryIO, Tuple

import numpy as np

from ran_tools import kernels
from ran_tools.errors import ExportError, SnapshotFormatError
from ran_tools.generator import INITIAL_EDGES, RanGraph
from ran_tools.rng import check_seed

logger = logging.getLogger(__name__)

MAGIC = b"RAN1"
_HEADER = struct.Struct("<4sQQ")


def _sink_name(sink) -> str:
    return str(getattr(sink, "name", type(sink).__name__))


def export_edges(graph: RanGraph, sink: BinaryIO):
    """Write one ``u v`` line per edge, in creation order."""
    try:
        np.savetxt(sink, graph.edges, fmt="%d", delimiter=" ")
    except OSError as e:
        raise ExportError(
            f"Could not write edge list to {_sink_name(sink)}: {e}"
        ) from e
    logger.debug("Exported %d edges to %s", graph.m, _sink_name(sink))


def import_edges(source) -> RanGraph:
    try:
        edges = np.loadtxt(source, dtype=np.int64, ndmin=2)
    except OSError as e:
        raise ExportError(f"Could not read edge list {_sink_name(source)}: {e}") from e
    if edges.shape[1] != 2:
        raise ValueError(f"Expected 2 columns per edge line, got {edges.shape[1]}")
    return RanGraph.from_edges(edges)


def _adjacency_values(graph: RanGraph) -> np.ndarray:
    n, entries = graph.n, graph.indices.shape[0]
    labels = graph.indices + 1
    deltas = labels.copy()
    deltas[1:] -= labels[:-1]
    starts = graph.indptr[:-1][graph.degrees > 0]
    deltas[starts] = labels[starts]

    values = np.empty(n + entries, dtype=np.int64)
    row_of_entry = np.repeat(np.arange(n, dtype=np.int64), graph.degrees)
    values[graph.indptr[:-1] + np.arange(n)] = graph.degrees
    values[np.arange(entries) + row_of_entry + 1] = deltas
    return values


def write_snapshot(graph: RanGraph, seed: int, sink: BinaryIO):
    payload = kernels.encode_varints(_adjacency_values(graph))
    try:
        sink.write(_HEADER.pack(MAGIC, graph.t, check_seed(seed)))
        sink.write(payload.tobytes())
    except OSError as e:
        raise ExportError(
            f"Could not write snapshot to {_sink_name(sink)}: {e}"
        ) from e
    logger.debug("Wrote %d byte snapshot for t=%d", _HEADER.size + payload.size, graph.t)


def read_snapshot(source: BinaryIO) -> Tuple[RanGraph, int]:
    """Return ``(graph, seed)``; edges are rebuilt in creation order."""
    data = source.read()
    if len(data) < _HEADER.size:
        raise SnapshotFormatError("Snapshot shorter than its header")
    magic, t, seed = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotFormatError(f"Bad snapshot magic {magic!r}")

    n, m = t + 3, 3 * t + 3
    # Every record is a varint of at least one byte.
    if n + 2 * m > len(data) - _HEADER.size:
        raise SnapshotFormatError(
            f"Snapshot header claims t={t} but the payload has only "
            f"{len(data) - _HEADER.size} bytes"
        )
    buf = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
    values, consumed = kernels.decode_varints(buf, n + 2 * m)
    if consumed != buf.shape[0]:
        raise SnapshotFormatError("Snapshot payload is truncated or has trailing bytes")
    degrees, labels, ok = kernels.unpack_adjacency(values, n)
    if not ok or labels.shape[0] != 2 * m:
        raise SnapshotFormatError("Snapshot adjacency records are malformed")

    # A vertex's neighbours with smaller labels are the corners of the face
    # it was inserted into.
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])
    edges = np.empty((m, 2), dtype=np.int64)
    edges[:3] = INITIAL_EDGES
    edges[3:, 1] = np.repeat(np.arange(4, n + 1, dtype=np.int64), 3)
    try:
        corners = labels[indptr[3:n, None] + np.arange(3)]
        edges[3:, 0] = corners.reshape(-1)
        graph = RanGraph.from_edges(edges)
    except (IndexError, ValueError) as e:
        raise SnapshotFormatError(f"Snapshot adjacency is not a RAN: {e}") from e
    if not np.array_equal(graph.indices + 1, labels):
        raise SnapshotFormatError("Snapshot adjacency is not a RAN")
    return graph, int(seed)
