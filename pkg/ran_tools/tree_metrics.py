"""Face depths, the subdivision tree and graph distances."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Union

import numpy as np
from scipy import optimize

from ran_tools import context, kernels
from ran_tools.errors import SizeLimitExceeded
from ran_tools.generator import FaceGenealogy, RanGraph
from ran_tools.rng import make_rng

logger = logging.getLogger(__name__)

TYPICAL_DISTANCE_LIMIT = 6 / 11

ETA_BRACKET = (1.0 + 1e-9, 10.0)
ETA_XTOL = 1e-14

# Expected counts below this are dropped from the ends of the DP window.
DEPTH_TRIM = np.longdouble(1e-40)

RngLike = Union[int, np.random.Generator]


def _as_rng(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(rng)


@dataclass(frozen=True)
class DepthProfile:
    empirical: Dict[int, int]
    expected: Dict[int, float] = field(default_factory=dict)

    @property
    def k_star(self) -> int:
        return max(self.empirical)

    @property
    def face_count(self) -> int:
        return sum(self.empirical.values())

    @property
    def mean_depth(self) -> float:
        return sum(k * c for k, c in self.empirical.items()) / self.face_count

    @property
    def expected_mean_depth(self) -> Optional[float]:
        if not self.expected:
            return None
        total = math.fsum(self.expected.values())
        return math.fsum(k * e for k, e in self.expected.items()) / total

    def rows(self):
        """``(depth, empirical, expected)`` for every depth either side knows."""
        depths = sorted(set(self.empirical) | set(self.expected))
        for k in depths:
            yield k, self.empirical.get(k, 0), self.expected.get(k, 0.0)


@dataclass(frozen=True)
class DiameterResult:
    lower: int
    upper: int
    method: str
    exact: Optional[int] = None
    tree_height: Optional[int] = None


@dataclass(frozen=True)
class Constants:
    eta: float
    rho: float
    residual: float


@dataclass(frozen=True)
class DistanceSample:
    mean: float
    std: float
    pair_count: int
    n: int
    limit: float = TYPICAL_DISTANCE_LIMIT

    @property
    def ratio(self) -> float:
        return self.mean / math.log(self.n)


def face_depth_histogram(genealogy: FaceGenealogy) -> Dict[int, int]:
    """Depth counts over the active faces (the genealogy leaves)."""
    depths = genealogy.depth[genealogy.leaves()]
    values, counts = np.unique(depths, return_counts=True)
    return {int(k): int(c) for k, c in zip(values, counts)}


def expected_depth_profile(t: int) -> Dict[int, float]:
    """Exact ``E[F_t(k)]`` from the one-step recursion, in extended precision.

    A uniformly chosen face of depth ``k-1`` leaves the active set and adds
    three faces of depth ``k``. Only the window of depths whose expectation
    exceeds ``DEPTH_TRIM`` is carried.
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, not {t}")
    values = np.array([1], dtype=np.longdouble)
    low = 1
    one = np.longdouble(1)
    for j in range(t):
        p = one / (2 * j + 1)
        nxt = np.zeros(values.shape[0] + 1, dtype=np.longdouble)
        nxt[:-1] = values * (one - p)
        nxt[1:] += 3 * p * values
        start = 0
        while nxt[start] < DEPTH_TRIM:
            start += 1
        stop = nxt.shape[0]
        while nxt[stop - 1] < DEPTH_TRIM:
            stop -= 1
        values = nxt[start:stop]
        low += start
    return {low + i: float(v) for i, v in enumerate(values)}


def expected_mean_depth(t: int) -> float:
    """Mean active-face depth: ``mu_{j+1} = mu_j + 3 / (2j + 3)``, ``mu_0 = 1``."""
    return 1.0 + math.fsum(3 / (2 * j + 3) for j in range(t))


def depth_profile(genealogy: FaceGenealogy, with_expected: bool = True) -> DepthProfile:
    t = genealogy.internal_count
    return DepthProfile(
        empirical=face_depth_histogram(genealogy),
        expected=expected_depth_profile(t) if with_expected else {},
    )


def depth_chain_bound(t: int, k: int) -> float:
    """Upper bound on ``E[F_t(k)]`` from the chains of ``k-1`` subdivisions.

    Each chain step picks one face out of ``2j-1`` and spawns three, so the
    expectation is at most ``3^(k-1) H^(k-1) / (k-1)!`` with
    ``H = sum 1/(2j-1) <= 1 + ln(2t-1)/2``.
    """
    if k < 1:
        raise ValueError(f"Depth must be positive, not {k}")
    harmonic = 0.0 if t < 1 else 1.0 + 0.5 * math.log(2 * t - 1)
    return (3 * harmonic) ** (k - 1) / math.factorial(k - 1)


def depth_display_bound(t: int, k: int) -> float:
    """``(ln(t) / 2)^k / k!``; summed over ``k`` it is only ``sqrt(t)``."""
    if t < 1:
        raise ValueError(f"t must be positive, not {t}")
    return (0.5 * math.log(t)) ** k / math.factorial(k)


def tree_height(genealogy: FaceGenealogy) -> int:
    return int(genealogy.depth[genealogy.leaves()].max()) - 1


def height_diagnostic(height: int, t: int) -> Dict[str, float]:
    if t < 2:
        raise ValueError("Height diagnostics need t >= 2")
    constants = solve_eta_rho()
    return {
        "height": height,
        "height_over_ln_t": height / math.log(t),
        "eta_half": constants.eta / 2,
        "rho_half": constants.rho / 2,
    }


def diameter_exact(graph: RanGraph, max_vertices: Optional[int] = None) -> int:
    if max_vertices is None:
        max_vertices = context.get_setting("exact_diameter_max_vertices")
    if graph.n > max_vertices:
        raise SizeLimitExceeded(
            f"Exact diameter is capped at {max_vertices} vertices (n={graph.n}); "
            "use diameter_estimate instead"
        )
    eccentricities = kernels.all_eccentricities(graph.indptr, graph.indices)
    return int(eccentricities.max())


def _is_complete(graph: RanGraph) -> bool:
    return graph.m == graph.n * (graph.n - 1) // 2


def diameter_estimate(
    graph: RanGraph, rng: RngLike, tree_height: Optional[int] = None
) -> DiameterResult:
    """Diameter bounds from four BFS roots.

    The roots are a random vertex, the two double-sweep endpoints and a middle
    vertex of the swept path. ``lower`` is the largest eccentricity found and
    ``upper`` the smallest sum of the two largest distances from one root.
    """
    if _is_complete(graph):
        return DiameterResult(
            lower=1, upper=1, method="complete", exact=1, tree_height=tree_height
        )

    rng = _as_rng(rng)
    n = graph.n
    dist = np.empty(n, dtype=np.int64)
    lower, upper = 0, 2 * n

    def sweep(root):
        nonlocal lower, upper
        ecc, far, _ = kernels.bfs(graph.indptr, graph.indices, root, dist)
        top_two = np.partition(dist, n - 2)[-2:]
        lower = max(lower, int(ecc))
        upper = min(upper, int(top_two.sum()))
        return int(far)

    start = int(rng.integers(n))
    first_end = sweep(start)
    second_end = sweep(first_end)
    from_first = dist.copy()
    sweep(second_end)
    span = int(from_first[second_end])
    on_path = (from_first + dist == span) & (from_first == span // 2)
    middle = int(np.flatnonzero(on_path)[0])
    sweep(middle)

    logger.debug(
        "Diameter bounds for t=%d: %d <= d <= %d", graph.t, lower, upper
    )
    return DiameterResult(
        lower=lower,
        upper=upper,
        method="double-sweep",
        tree_height=tree_height,
    )


def diameter(
    graph: RanGraph, rng: RngLike, tree_height: Optional[int] = None
) -> DiameterResult:
    """Exact diameter where the size cap allows it, bounds otherwise."""
    try:
        exact = diameter_exact(graph)
    except SizeLimitExceeded:
        logger.warning(
            "n=%d is over the exact diameter cap, reporting bounds only", graph.n
        )
        return diameter_estimate(graph, rng, tree_height)
    return DiameterResult(
        lower=exact, upper=exact, method="exact", exact=exact, tree_height=tree_height
    )


def typical_distance(graph: RanGraph, pair_count: int, rng: RngLike) -> DistanceSample:
    """Mean distance over uniform pairs of distinct internal vertices."""
    if graph.t < 2:
        raise ValueError("Typical distance needs two internal vertices (t >= 2)")
    if pair_count < 1:
        raise ValueError(f"pair_count must be positive, not {pair_count}")
    rng = _as_rng(rng)
    n = graph.n
    sources = rng.integers(4, n + 1, size=pair_count)
    targets = rng.integers(4, n, size=pair_count)
    targets += targets >= sources
    distances = kernels.pair_distances(
        graph.indptr, graph.indices, sources - 1, targets - 1
    )
    sample = DistanceSample(
        mean=float(distances.mean()),
        std=float(distances.std(ddof=1)) if pair_count > 1 else 0.0,
        pair_count=pair_count,
        n=n,
    )
    logger.info(
        "Typical distance over %d pairs: %.4f (%.4f ln n)",
        pair_count,
        sample.mean,
        sample.ratio,
    )
    return sample


def _eta_equation(eta: float) -> float:
    return eta - 1.0 - math.log(eta) - math.log(3.0)


def solve_eta_rho() -> Constants:
    """Root above 1 of ``eta - 1 - ln(eta) = ln(3)``, and ``rho = 1/eta``."""
    eta = optimize.bisect(
        _eta_equation,
        *ETA_BRACKET,
        xtol=ETA_XTOL,
        rtol=4 * np.finfo(float).eps,
        maxiter=200,
    )
    return Constants(eta=eta, rho=1.0 / eta, residual=abs(_eta_equation(eta)))
