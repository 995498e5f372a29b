import logging
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Tuple

import numpy as np
from scipy import sparse

from ran_tools import context, kernels
from ran_tools.errors import ResourceExhausted
from ran_tools.helpers import check_label
from ran_tools.rng import FaceSampler, check_seed, make_rng, uniform_face_sampler

logger = logging.getLogger(__name__)

INITIAL_FACE = (1, 2, 3)
INITIAL_EDGES = ((1, 2), (1, 3), (2, 3))

# Working set per step: process arrays, CSR build keys and the final graph.
BYTES_PER_STEP = 512
BASE_BYTES = 1 << 20


def estimate_memory(t_max: int) -> int:
    return BASE_BYTES + BYTES_PER_STEP * (t_max + 1)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class GeneratorConfig:
    t_max: int
    seed: int

    def __post_init__(self):
        if isinstance(self.t_max, bool) or int(self.t_max) != self.t_max:
            raise TypeError(f"t_max must be an integer, not {self.t_max!r}")
        if self.t_max < 0:
            raise ValueError(f"t_max must be non-negative, not {self.t_max}")
        object.__setattr__(self, "t_max", int(self.t_max))
        object.__setattr__(self, "seed", check_seed(self.seed))


@dataclass(frozen=True)
class Face:
    a: int
    b: int
    c: int
    depth: int
    node_id: int

    @property
    def vertices(self) -> Tuple[int, int, int]:
        return self.a, self.b, self.c


class InsertionRecord(NamedTuple):
    step: int
    chosen_face: Face
    new_vertex_label: int


class GenealogyNode(NamedTuple):
    node_id: int
    face: Tuple[int, int, int]
    depth: int
    parent: Optional[int]
    children: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class RanGraph:
    """Immutable RAN after ``t`` steps.

    ``edges`` holds 1-based ``(u, v)`` pairs with ``u < v`` in creation order.
    ``indptr``/``indices`` is the CSR adjacency over 0-based vertex indices
    with each neighbour list sorted. ``degrees`` and ``insertion_step`` are
    indexed by ``label - 1``.
    """

    t: int
    edges: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    degrees: np.ndarray
    insertion_step: np.ndarray

    @classmethod
    def from_edges(cls, edges: np.ndarray) -> "RanGraph":
        edges = np.ascontiguousarray(edges, dtype=np.int64).reshape(-1, 2)
        m = edges.shape[0]
        if m < 3 or m % 3:
            raise ValueError(f"{m} edges cannot come from a RAN (need 3t+3)")
        t = m // 3 - 1
        n = t + 3
        if edges.min() < 1 or edges.max() > n:
            raise ValueError(f"Edge labels must lie in 1..{n}")
        if np.any(edges[:, 0] >= edges[:, 1]):
            raise ValueError("Every edge must be written as u < v")
        if not np.array_equal(edges[:3], INITIAL_EDGES):
            raise ValueError(f"The first three edges must be {INITIAL_EDGES}")
        # Vertex v >= 4 owns the three edges written just after those of v - 1.
        if not np.array_equal(edges[3:, 1], np.repeat(np.arange(4, n + 1), 3)):
            raise ValueError("Each new vertex must bring exactly three edges, in order")
        codes = edges[:, 0] * (n + 1) + edges[:, 1]
        if np.unique(codes).shape[0] != m:
            raise ValueError("Edge list contains duplicate edges")

        rows = np.concatenate((edges[:, 0], edges[:, 1])) - 1
        cols = np.concatenate((edges[:, 1], edges[:, 0])) - 1
        keys = rows * n + cols
        keys.sort()
        degrees = np.bincount(rows, minlength=n).astype(np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(degrees, out=indptr[1:])
        indices = keys % n
        insertion_step = np.maximum(np.arange(n, dtype=np.int64) - 2, 0)
        return cls(
            t=t,
            edges=_frozen(edges.copy()),
            indptr=_frozen(indptr),
            indices=_frozen(indices),
            degrees=_frozen(degrees),
            insertion_step=_frozen(insertion_step),
        )

    @property
    def n(self) -> int:
        return self.t + 3

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())

    def neighbors(self, v: int) -> np.ndarray:
        v = check_label(v, self.n)
        return self.indices[self.indptr[v - 1] : self.indptr[v]] + 1

    def adjacency(self) -> Iterator[Tuple[int, np.ndarray]]:
        for v in range(1, self.n + 1):
            yield v, self.neighbors(v)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(np.isin(v, self.neighbors(u)))

    def to_sparse(self) -> sparse.csr_matrix:
        data = np.ones(self.indices.shape[0], dtype=np.float64)
        return sparse.csr_matrix(
            (data, self.indices, self.indptr), shape=(self.n, self.n)
        )

    def __eq__(self, other):
        if not isinstance(other, RanGraph):
            return NotImplemented
        return self.t == other.t and np.array_equal(self.edges, other.edges)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FaceGenealogy:
    """Subdivision tree: node 0 is the initial face, step ``j`` creates
    nodes ``3j-2 .. 3j``. Active faces are exactly the leaves."""

    verts: np.ndarray
    depth: np.ndarray
    parent: np.ndarray
    first_child: np.ndarray

    @property
    def node_count(self) -> int:
        return self.verts.shape[0]

    @property
    def internal_count(self) -> int:
        return int(np.count_nonzero(self.first_child >= 0))

    @property
    def leaf_count(self) -> int:
        return self.node_count - self.internal_count

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.first_child < 0)

    def children(self, node: int) -> Tuple[int, ...]:
        first = int(self.first_child[node])
        return () if first < 0 else (first, first + 1, first + 2)

    def record(self, node: int) -> GenealogyNode:
        parent = int(self.parent[node])
        return GenealogyNode(
            node_id=int(node),
            face=tuple(int(x) for x in self.verts[node]),
            depth=int(self.depth[node]),
            parent=None if parent < 0 else parent,
            children=self.children(node),
        )

    def face(self, node: int) -> Face:
        a, b, c = (int(x) for x in self.verts[node])
        return Face(a, b, c, depth=int(self.depth[node]), node_id=int(node))


@dataclass(frozen=True, eq=False)
class FaceStore:
    """Dense array of active faces, referenced by genealogy node id."""

    active: np.ndarray
    genealogy: FaceGenealogy

    @property
    def count(self) -> int:
        return self.active.shape[0]

    def __len__(self):
        return self.count

    def __getitem__(self, index: int) -> Face:
        return self.genealogy.face(int(self.active[index]))

    def __iter__(self) -> Iterator[Face]:
        for node in self.active:
            yield self.genealogy.face(int(node))

    def depths(self) -> np.ndarray:
        return self.genealogy.depth[self.active]

    def triples(self) -> np.ndarray:
        return self.genealogy.verts[self.active]


@dataclass(frozen=True, eq=False)
class Generation:
    config: GeneratorConfig
    graph: RanGraph
    faces: FaceStore
    genealogy: FaceGenealogy


class RanProcess:
    """Mutable RAN growth state with room for ``capacity`` steps."""

    def __init__(
        self,
        capacity: int,
        seed: Optional[int] = None,
        sampler: FaceSampler = uniform_face_sampler,
        memory_limit: Optional[int] = None,
    ):
        if capacity < 0:
            raise ValueError(f"capacity must be non-negative, not {capacity}")
        if memory_limit is None:
            memory_limit = context.get_setting("memory_limit")
        requested = estimate_memory(capacity)
        if requested > memory_limit:
            raise ResourceExhausted(requested, memory_limit, capacity)

        self._capacity = capacity
        self._sampler = sampler
        self._rng = make_rng(seed) if seed is not None else None
        self._t = 0

        nodes = 3 * capacity + 1
        try:
            self._active = np.empty(2 * capacity + 1, dtype=np.int64)
            self._verts = np.empty((nodes, 3), dtype=np.int64)
            self._depth = np.empty(nodes, dtype=np.int64)
            self._parent = np.empty(nodes, dtype=np.int64)
            self._first_child = np.empty(nodes, dtype=np.int64)
            self._edges = np.empty((3 * capacity + 3, 2), dtype=np.int64)
            self._degrees = np.zeros(capacity + 3, dtype=np.int64)
        except MemoryError as e:
            raise ResourceExhausted(requested, memory_limit, capacity) from e

        self._active[0] = 0
        self._verts[0] = INITIAL_FACE
        self._depth[0] = 1
        self._parent[0] = -1
        self._first_child[0] = -1
        self._edges[:3] = INITIAL_EDGES
        self._degrees[:3] = 2

    @property
    def t(self) -> int:
        return self._t

    @property
    def capacity(self) -> int:
        return self._capacity

    @property
    def n(self) -> int:
        return self._t + 3

    @property
    def m(self) -> int:
        return 3 * self._t + 3

    @property
    def face_count(self) -> int:
        return 2 * self._t + 1

    def _arrays(self):
        return (
            self._active,
            self._verts,
            self._depth,
            self._parent,
            self._first_child,
            self._edges,
            self._degrees,
        )

    def _check_room(self, steps: int):
        if self._t + steps > self._capacity:
            raise ValueError(
                f"Process sized for {self._capacity} steps cannot take "
                f"{steps} more at t={self._t}"
            )

    def step(self, choice: Optional[int] = None) -> InsertionRecord:
        """Subdivide one active face; ``choice`` indexes the active array."""
        self._check_room(1)
        step = self._t + 1
        count = 2 * step - 1
        if choice is None:
            if self._rng is None:
                raise ValueError("A seed or an explicit face choice is required")
            choice = int(self._sampler(self._rng, step, 1)[0])
        if not 0 <= choice < count:
            raise ValueError(f"Face index {choice} outside 0..{count - 1}")

        node = int(kernels.subdivide(step, choice, *self._arrays()))
        self._t = step
        logger.debug("Step %d: vertex %d into face node %d", step, step + 3, node)
        return InsertionRecord(
            step=step,
            chosen_face=self._genealogy_view().face(node),
            new_vertex_label=step + 3,
        )

    def run(self, choices: np.ndarray):
        choices = np.ascontiguousarray(choices, dtype=np.int64)
        self._check_room(choices.shape[0])
        highs = 2 * np.arange(self._t + 1, self._t + 1 + choices.shape[0]) - 1
        if choices.size and (choices.min() < 0 or np.any(choices >= highs)):
            raise ValueError("Face choices out of range for their steps")
        kernels.grow(self._t + 1, choices, *self._arrays())
        self._t += choices.shape[0]

    def _genealogy_view(self) -> FaceGenealogy:
        nodes = 3 * self._t + 1
        return FaceGenealogy(
            verts=self._verts[:nodes],
            depth=self._depth[:nodes],
            parent=self._parent[:nodes],
            first_child=self._first_child[:nodes],
        )

    def edges(self) -> np.ndarray:
        return self._edges[: self.m]

    def degrees(self) -> np.ndarray:
        return self._degrees[: self.n]

    def active_triples(self) -> np.ndarray:
        return self._verts[self._active[: self.face_count]]

    def check_invariants(self):
        """Raise ``AssertionError`` if the count, Euler or face identities fail."""
        t, n, m, faces = self._t, self.n, self.m, self.face_count
        edges = self.edges()
        if len(np.unique(edges[:, 0] * (n + 1) + edges[:, 1])) != m:
            raise AssertionError(f"t={t}: duplicate edges")
        if int(self.degrees().sum()) != 2 * m:
            raise AssertionError(f"t={t}: degree sum != 2m")
        if m != 3 * n - 6:
            raise AssertionError(f"t={t}: m={m} is not 3n-6")
        if n - m + (faces + 1) != 2:
            raise AssertionError(f"t={t}: Euler relation fails")
        if t and self._degrees[n - 1] != 3:
            raise AssertionError(f"t={t}: newest vertex degree is not 3")

        codes = np.sort(edges[:, 0] * (n + 1) + edges[:, 1])
        triples = self.active_triples()
        for i, j in ((0, 1), (0, 2), (1, 2)):
            wanted = triples[:, i] * (n + 1) + triples[:, j]
            pos = np.searchsorted(codes, wanted)
            pos[pos == m] = 0
            if not np.array_equal(codes[pos], wanted):
                raise AssertionError(f"t={t}: an active face is not a triangle")

    def snapshot(self, config: Optional[GeneratorConfig] = None) -> Generation:
        genealogy = self._genealogy_view()
        genealogy = FaceGenealogy(
            verts=_frozen(genealogy.verts.copy()),
            depth=_frozen(genealogy.depth.copy()),
            parent=_frozen(genealogy.parent.copy()),
            first_child=_frozen(genealogy.first_child.copy()),
        )
        faces = FaceStore(
            active=_frozen(self._active[: self.face_count].copy()),
            genealogy=genealogy,
        )
        graph = RanGraph.from_edges(self.edges())
        if config is None:
            config = GeneratorConfig(t_max=self._t, seed=0)
        return Generation(config=config, graph=graph, faces=faces, genealogy=genealogy)


def generate(
    config: GeneratorConfig,
    debug: bool = False,
    sampler: FaceSampler = uniform_face_sampler,
) -> Generation:
    """Grow a RAN for ``config.t_max`` steps.

    The result is a pure function of ``(t_max, seed)`` for a given sampler.
    With ``debug`` the process invariants are checked after every step.
    """
    process = RanProcess(config.t_max, sampler=sampler)
    choices = sampler(make_rng(config.seed), 1, config.t_max)
    if debug:
        process.check_invariants()
        for choice in choices:
            process.step(int(choice))
            process.check_invariants()
    else:
        process.run(choices)

    result = process.snapshot(config)
    logger.info(
        "Generated RAN t=%d seed=%d: n=%d m=%d faces=%d",
        config.t_max,
        config.seed,
        result.graph.n,
        result.graph.m,
        result.faces.count,
    )
    return result


def degree(graph: RanGraph, v: int) -> int:
    v = check_label(v, graph.n)
    return int(graph.indptr[v] - graph.indptr[v - 1])
