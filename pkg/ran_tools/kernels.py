"""Compiled inner loops.

Vertex labels are 1-based in face triples and edges; CSR arrays and BFS work
on 0-based vertex indices (label - 1).
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, nogil=True)
def subdivide(
    step,
    choice,
    active,
    node_verts,
    node_depth,
    node_parent,
    node_first_child,
    edges,
    degrees,
):
    """Insert vertex ``step + 3`` into active face ``active[choice]``.

    The picked face is replaced in place by its first child and the two other
    children are appended, so the active array stays dense. Returns the
    genealogy id of the subdivided face.
    """
    count = 2 * step - 1
    node = active[choice]
    a = node_verts[node, 0]
    b = node_verts[node, 1]
    c = node_verts[node, 2]
    v = step + 3
    first = 3 * step - 2

    node_first_child[node] = first
    node_verts[first, 0] = a
    node_verts[first, 1] = b
    node_verts[first, 2] = v
    node_verts[first + 1, 0] = a
    node_verts[first + 1, 1] = c
    node_verts[first + 1, 2] = v
    node_verts[first + 2, 0] = b
    node_verts[first + 2, 1] = c
    node_verts[first + 2, 2] = v
    for i in range(3):
        node_depth[first + i] = node_depth[node] + 1
        node_parent[first + i] = node
        node_first_child[first + i] = -1

    active[choice] = first
    active[count] = first + 1
    active[count + 1] = first + 2

    e = 3 * step
    edges[e, 0] = a
    edges[e, 1] = v
    edges[e + 1, 0] = b
    edges[e + 1, 1] = v
    edges[e + 2, 0] = c
    edges[e + 2, 1] = v

    degrees[a - 1] += 1
    degrees[b - 1] += 1
    degrees[c - 1] += 1
    degrees[v - 1] = 3
    return node


@njit(cache=True, nogil=True)
def grow(
    first_step,
    choices,
    active,
    node_verts,
    node_depth,
    node_parent,
    node_first_child,
    edges,
    degrees,
):
    for i in range(choices.shape[0]):
        subdivide(
            first_step + i,
            choices[i],
            active,
            node_verts,
            node_depth,
            node_parent,
            node_first_child,
            edges,
            degrees,
        )


@njit(cache=True, nogil=True)
def degree_trials(choices, label):
    """Final degree of ``label`` for each row of face choices."""
    trials, steps = choices.shape
    out = np.empty(trials, np.int64)
    faces = np.empty((2 * steps + 1, 3), np.int64)
    for r in range(trials):
        faces[0, 0] = 1
        faces[0, 1] = 2
        faces[0, 2] = 3
        deg = 2 if label <= 3 else 0
        for j in range(1, steps + 1):
            count = 2 * j - 1
            idx = choices[r, j - 1]
            a = faces[idx, 0]
            b = faces[idx, 1]
            c = faces[idx, 2]
            v = j + 3
            if v == label:
                deg = 3
            elif a == label or b == label or c == label:
                deg += 1
            faces[idx, 2] = v
            faces[count, 0] = a
            faces[count, 1] = c
            faces[count, 2] = v
            faces[count + 1, 0] = b
            faces[count + 1, 1] = c
            faces[count + 1, 2] = v
        out[r] = deg
    return out


@njit(cache=True, nogil=True)
def depth_count_trials(choices):
    """Active-face depth counts per trial; column ``k`` counts depth ``k``."""
    trials, steps = choices.shape
    counts = np.zeros((trials, steps + 2), np.int64)
    depth = np.empty(2 * steps + 1, np.int64)
    for r in range(trials):
        depth[0] = 1
        for j in range(1, steps + 1):
            count = 2 * j - 1
            idx = choices[r, j - 1]
            d = depth[idx] + 1
            depth[idx] = d
            depth[count] = d
            depth[count + 1] = d
        for i in range(2 * steps + 1):
            counts[r, depth[i]] += 1
    return counts


@njit(cache=True, nogil=True)
def bfs(indptr, indices, source, dist):
    """Fill ``dist`` with hop distances from ``source``.

    Returns ``(eccentricity, farthest_vertex, reached)``; the farthest vertex
    is the last one dequeued.
    """
    n = indptr.shape[0] - 1
    for i in range(n):
        dist[i] = -1
    queue = np.empty(n, np.int64)
    head = 0
    tail = 1
    queue[0] = source
    dist[source] = 0
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u] + 1
        for p in range(indptr[u], indptr[u + 1]):
            w = indices[p]
            if dist[w] < 0:
                dist[w] = du
                queue[tail] = w
                tail += 1
    last = queue[tail - 1]
    return dist[last], last, tail


@njit(cache=True, parallel=True)
def all_eccentricities(indptr, indices):
    n = indptr.shape[0] - 1
    ecc = np.empty(n, np.int64)
    for s in prange(n):
        dist = np.empty(n, np.int64)
        e, _, _ = bfs(indptr, indices, s, dist)
        ecc[s] = e
    return ecc


@njit(cache=True, parallel=True)
def pair_distances(indptr, indices, sources, targets):
    n = indptr.shape[0] - 1
    out = np.empty(sources.shape[0], np.int64)
    for i in prange(sources.shape[0]):
        dist = np.empty(n, np.int64)
        bfs(indptr, indices, sources[i], dist)
        out[i] = dist[targets[i]]
    return out


@njit(cache=True)
def encode_varints(values):
    out = np.empty(values.shape[0] * 10, np.uint8)
    pos = 0
    for i in range(values.shape[0]):
        x = values[i]
        while x >= 128:
            out[pos] = (x & 127) | 128
            pos += 1
            x >>= 7
        out[pos] = x
        pos += 1
    return out[:pos]


@njit(cache=True)
def decode_varints(buf, count):
    """Decode ``count`` varints; ``consumed`` is -1 when ``buf`` runs short."""
    out = np.empty(count, np.int64)
    pos = 0
    for i in range(count):
        x = np.int64(0)
        shift = 0
        while True:
            if pos >= buf.shape[0] or shift > 56:
                return out, -1
            byte = np.int64(buf[pos])
            pos += 1
            x |= (byte & 127) << shift
            if byte < 128:
                break
            shift += 7
        out[i] = x
    return out, pos


@njit(cache=True)
def unpack_adjacency(values, n):
    """Split ``deg, nbr deltas...`` records into degrees and neighbour labels.

    Returns ``ok=False`` if the records do not tile ``values`` exactly or a
    neighbour list is not strictly increasing.
    """
    degrees = np.zeros(n, np.int64)
    labels = np.empty(values.shape[0], np.int64)
    pos = 0
    out = 0
    for v in range(n):
        if pos >= values.shape[0]:
            return degrees, labels[:0], False
        deg = values[pos]
        pos += 1
        if deg < 0 or pos + deg > values.shape[0]:
            return degrees, labels[:0], False
        degrees[v] = deg
        label = 0
        for i in range(deg):
            delta = values[pos + i]
            if i > 0 and delta <= 0:
                return degrees, labels[:0], False
            label += delta
            labels[out] = label
            out += 1
        pos += deg
    if pos != values.shape[0]:
        return degrees, labels[:0], False
    return degrees, labels[:out], True
