import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from ran_tools import context
from ran_tools.errors import DegenerateHistogram, NotConverged
from ran_tools.generator import RanGraph

logger = logging.getLogger(__name__)

# Below this order the adjacency matrix is diagonalised densely.
DENSE_MAX_ORDER = 64
# ARPACK's stopping rule is on Ritz estimates; ask for more than we check.
ARPACK_TOL_FACTOR = 1e-2
_START_VECTOR_SEED = 0x5EED

DECOMPOSITION_MIN_T = 256


class RankedVertex(NamedTuple):
    label: int
    degree: int


@dataclass(frozen=True)
class DegreeReport:
    top_k: Tuple[RankedVertex, ...]
    histogram: Dict[int, int]
    alpha_hat: Optional[float] = None
    d_min: Optional[int] = None

    @property
    def degrees(self) -> List[int]:
        return [v.degree for v in self.top_k]


@dataclass(frozen=True)
class SpectralReport:
    lambdas: Tuple[float, ...]
    ratios: Tuple[float, ...]
    solver_tol: float
    iterations: Tuple[int, ...]
    residuals: Tuple[float, ...]
    method: str


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Vertex split by insertion step and the star forest between S1 and S3."""

    t: int
    t1: int
    t2: int
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    s3_prime: np.ndarray
    f_mask: np.ndarray
    f_edges: np.ndarray
    h_edges: np.ndarray
    star_sizes: Dict[int, int]

    @property
    def largest_star(self) -> int:
        return max(self.star_sizes.values(), default=0)

    @property
    def f_spectral_radius(self) -> float:
        return math.sqrt(self.largest_star)

    @property
    def s3_prime_bound(self) -> float:
        return self.t ** (1 / 6)


@dataclass(frozen=True)
class EigenRatioReport:
    spectral: SpectralReport
    top_degrees: Tuple[int, ...]
    ratios: Tuple[float, ...]
    h_lambda1: Optional[float] = None
    h_ratio: Optional[float] = None
    f_lambda1: Optional[float] = None
    s3_prime_size: Optional[int] = None
    s3_prime_bound: Optional[float] = None


@dataclass(frozen=True)
class DegreeWindow:
    f_value: float
    lower: float
    upper: float
    top_degrees: Tuple[int, ...]
    max_in_window: bool
    all_above_lower: bool
    gaps: Tuple[int, ...]
    gaps_ok: Tuple[bool, ...]


def top_k_degrees(graph: RanGraph, k: int) -> Tuple[RankedVertex, ...]:
    """Exact ``k`` largest degrees; ties go to the smaller label."""
    if not 1 <= k <= graph.n:
        raise ValueError(f"k must lie in 1..{graph.n}, not {k}")
    labels = np.arange(1, graph.n + 1)
    order = np.lexsort((labels, -graph.degrees))[:k]
    return tuple(RankedVertex(int(labels[i]), int(graph.degrees[i])) for i in order)


def degree_histogram(graph: RanGraph) -> Dict[int, int]:
    values, counts = np.unique(graph.degrees, return_counts=True)
    return {int(d): int(c) for d, c in zip(values, counts)}


def fit_power_law_exponent(histogram: Mapping[int, int], d_min: int) -> float:
    """Discrete power-law MLE ``1 + N / sum(ln(d / (d_min - 1/2)))``."""
    tail = {d: c for d, c in histogram.items() if d >= d_min and c > 0}
    if len(tail) < 2:
        raise DegenerateHistogram(
            f"Need at least two distinct degrees >= {d_min}, got {sorted(tail)}"
        )
    degrees = np.fromiter(tail.keys(), dtype=np.float64)
    counts = np.fromiter(tail.values(), dtype=np.float64)
    log_sum = float(np.sum(counts * np.log(degrees / (d_min - 0.5))))
    return 1.0 + float(counts.sum()) / log_sum


def degree_report(
    graph: RanGraph, k: int, d_min: Optional[int] = None
) -> DegreeReport:
    histogram = degree_histogram(graph)
    alpha_hat = None
    if d_min is not None:
        try:
            alpha_hat = fit_power_law_exponent(histogram, d_min)
        except DegenerateHistogram:
            logger.info("Degree tail above %d too small for a power-law fit", d_min)
    return DegreeReport(
        top_k=top_k_degrees(graph, k),
        histogram=histogram,
        alpha_hat=alpha_hat,
        d_min=d_min,
    )


def degree_window(graph: RanGraph, k: int, f_value: Optional[float] = None):
    """Where the top degrees sit relative to ``sqrt(t)/f`` and ``sqrt(t)*f``."""
    if graph.t < 2:
        raise ValueError("The degree window needs t >= 2")
    if f_value is None:
        f_value = math.log(graph.t)
    root = math.sqrt(graph.t)
    lower, upper = root / f_value, root * f_value
    top = tuple(v.degree for v in top_k_degrees(graph, k))
    gaps = tuple(top[i - 1] - top[i] for i in range(1, len(top)))
    return DegreeWindow(
        f_value=f_value,
        lower=lower,
        upper=upper,
        top_degrees=top,
        max_in_window=lower <= top[0] <= upper,
        all_above_lower=all(d >= lower for d in top),
        gaps=gaps,
        gaps_ok=tuple(g >= lower for g in gaps),
    )


def _residual(matrix, x: np.ndarray) -> Tuple[float, float]:
    x = x / np.linalg.norm(x)
    ax = matrix @ x
    lam = float(x @ ax)
    return lam, float(np.linalg.norm(ax - lam * x))


def _dense_top(matrix, k: int) -> Tuple[List[float], List[float], List[int]]:
    vals, vecs = linalg.eigh(matrix.toarray())
    lambdas, residuals = [], []
    for i in range(1, k + 1):
        lam, res = _residual(matrix, vecs[:, -i])
        lambdas.append(float(vals[-i]))
        residuals.append(res)
    return lambdas, residuals, [0] * k


def _deflated_top(
    matrix, k: int, tol: float, max_iterations: int
) -> Tuple[List[float], List[float], List[int]]:
    """Top ``k`` eigenpairs, one Lanczos run per eigenvalue.

    Found eigenvectors are pushed down to ``shift`` (below the spectrum by
    Gershgorin) so each run converges to the next largest eigenvalue.
    """
    n = matrix.shape[0]
    shift = -(float(abs(matrix).sum(axis=1).max()) + 1.0)
    rng = np.random.default_rng(_START_VECTOR_SEED)
    lambdas, residuals, iterations, vectors = [], [], [], []

    for index in range(1, k + 1):
        calls = [0]
        locked = np.column_stack(vectors) if vectors else None
        weights = np.asarray(lambdas) - shift

        def matvec(x, locked=locked, weights=weights, calls=calls):
            calls[0] += 1
            x = np.ravel(x)
            y = matrix @ x
            if locked is not None:
                y = y - locked @ (weights * (locked.T @ x))
            return y

        operator = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
        try:
            _, vecs = eigsh(
                operator,
                k=1,
                which="LA",
                tol=tol * ARPACK_TOL_FACTOR,
                maxiter=max_iterations,
                v0=rng.standard_normal(n),
            )
        except ArpackNoConvergence as e:
            estimate, residual = None, math.inf
            if len(e.eigenvalues):
                estimate, residual = _residual(matrix, e.eigenvectors[:, 0])
            raise NotConverged(index, estimate, residual, calls[0]) from e

        x = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
        lam, residual = _residual(matrix, x)
        if residual > tol * max(1.0, abs(lam)):
            raise NotConverged(index, lam, residual, calls[0])
        logger.debug(
            "lambda_%d=%.10g after %d matvecs (residual %.2e)",
            index,
            lam,
            calls[0],
            residual,
        )
        lambdas.append(lam)
        residuals.append(residual)
        iterations.append(calls[0])
        vectors.append(x)
    return lambdas, residuals, iterations


def largest_eigenvalues(matrix, k: int, tol: float, max_iterations: int):
    if matrix.shape[0] <= DENSE_MAX_ORDER:
        return _dense_top(matrix, k) + ("dense",)
    return _deflated_top(matrix, k, tol, max_iterations) + ("lanczos",)


def top_k_eigenvalues(
    graph: RanGraph,
    k: int,
    tol: Optional[float] = None,
    max_iterations: Optional[int] = None,
) -> SpectralReport:
    if not 1 <= k <= graph.n:
        raise ValueError(f"k must lie in 1..{graph.n}, not {k}")
    tol = context.get_setting("eigen_tol") if tol is None else tol
    if tol <= 0:
        raise ValueError(f"tol must be positive, not {tol}")
    if max_iterations is None:
        max_iterations = context.get_setting("eigen_max_iterations")

    lambdas, residuals, iterations, method = largest_eigenvalues(
        graph.to_sparse(), k, tol, max_iterations
    )
    degrees = [v.degree for v in top_k_degrees(graph, k)]
    ratios = tuple(lam / math.sqrt(d) for lam, d in zip(lambdas, degrees))
    logger.info(
        "Top %d eigenvalues of t=%d (%s): %s",
        k,
        graph.t,
        method,
        ", ".join(f"{lam:.6g}" for lam in lambdas),
    )
    return SpectralReport(
        lambdas=tuple(lambdas),
        ratios=ratios,
        solver_tol=tol,
        iterations=tuple(iterations),
        residuals=tuple(residuals),
        method=method,
    )


def _floor_root_8(x: int) -> int:
    return math.isqrt(math.isqrt(math.isqrt(x)))


def star_forest_decomposition(graph: RanGraph) -> Decomposition:
    t = graph.t
    if t < DECOMPOSITION_MIN_T:
        raise ValueError(
            f"The decomposition needs t >= {DECOMPOSITION_MIN_T}, not {t}"
        )
    t1 = _floor_root_8(t)
    t2 = math.isqrt(_floor_root_8(t**9))

    step = graph.insertion_step
    in_s1 = step <= t1
    in_s3 = step > t2
    labels = np.arange(1, graph.n + 1)

    u, v = graph.edges[:, 0] - 1, graph.edges[:, 1] - 1
    s1_neighbours = np.bincount(u, weights=in_s1[v], minlength=graph.n) + np.bincount(
        v, weights=in_s1[u], minlength=graph.n
    )
    in_s3_prime = in_s3 & (s1_neighbours >= 2)
    leaf_side = in_s3 & ~in_s3_prime
    f_mask = (in_s1[u] & leaf_side[v]) | (in_s1[v] & leaf_side[u])

    f_edges = graph.edges[f_mask]
    centres = np.where(in_s1[f_edges[:, 0] - 1], f_edges[:, 0], f_edges[:, 1])
    centre_labels, sizes = np.unique(centres, return_counts=True)
    return Decomposition(
        t=t,
        t1=t1,
        t2=t2,
        s1=labels[in_s1],
        s2=labels[~in_s1 & ~in_s3],
        s3=labels[in_s3],
        s3_prime=labels[in_s3_prime],
        f_mask=f_mask,
        f_edges=f_edges,
        h_edges=graph.edges[~f_mask],
        star_sizes={int(c): int(s) for c, s in zip(centre_labels, sizes)},
    )


def edges_to_sparse(edges: np.ndarray, n: int) -> sparse.csr_matrix:
    rows = np.concatenate((edges[:, 0], edges[:, 1])) - 1
    cols = np.concatenate((edges[:, 1], edges[:, 0])) - 1
    data = np.ones(rows.shape[0], dtype=np.float64)
    return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))


def eigen_ratio_report(
    graph: RanGraph, k: int, tol: Optional[float] = None
) -> EigenRatioReport:
    spectral = top_k_eigenvalues(graph, k, tol)
    top = tuple(v.degree for v in top_k_degrees(graph, k))
    h_lambda1 = h_ratio = f_lambda1 = None
    s3_prime_size = s3_prime_bound = None
    if graph.t >= DECOMPOSITION_MIN_T:
        decomposition = star_forest_decomposition(graph)
        lambdas, _, _, _ = largest_eigenvalues(
            edges_to_sparse(decomposition.h_edges, graph.n),
            1,
            spectral.solver_tol,
            context.get_setting("eigen_max_iterations"),
        )
        h_lambda1 = lambdas[0]
        h_ratio = h_lambda1 / graph.t**0.25
        f_lambda1 = decomposition.f_spectral_radius
        s3_prime_size = len(decomposition.s3_prime)
        s3_prime_bound = decomposition.s3_prime_bound
        logger.info(
            "lambda_1(H)/t^(1/4)=%.4f, lambda_1(F)=%.4f", h_ratio, f_lambda1
        )
    return EigenRatioReport(
        spectral=spectral,
        top_degrees=top,
        ratios=spectral.ratios,
        h_lambda1=h_lambda1,
        h_ratio=h_ratio,
        f_lambda1=f_lambda1,
        s3_prime_size=s3_prime_size,
        s3_prime_bound=s3_prime_bound,
    )


def star_spectral_radius(decomposition: Decomposition) -> float:
    """Largest eigenvalue of the star forest: sqrt of its largest star."""
    return decomposition.f_spectral_radius
