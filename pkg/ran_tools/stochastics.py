"""Monte Carlo estimators and the exhaustive small-t oracle.

Every estimator splits its trials into batches of ``batch_size``; batch ``i``
draws from ``derive_seed(seed, i)`` and batch results are combined in index
order, so output depends only on the parameters, the seed and the batch size.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple, TypeVar

import numpy as np
from scipy import special

from ran_tools import context, kernels
from ran_tools.generator import RanProcess
from ran_tools.rng import (
    FaceSampler,
    batches,
    derive_seed,
    make_rng,
    uniform_face_sampler,
)
from ran_tools.tree_metrics import diameter_exact, face_depth_histogram

logger = logging.getLogger(__name__)

ENUMERATION_MAX_T = 6
RISING_FACTORIAL_MAX_BITS = 1 << 16

# Faces B and C of the waiting-time configuration sit at indices 0 and 1.
WAITING_TARGETS = 2
# Active faces at local time 0, before the first step.
WAITING_START_FACES = 5

T = TypeVar("T")


def _run_batches(
    total: int,
    seed: int,
    work: Callable[[np.random.Generator, int], T],
    batch_size: Optional[int] = None,
    workers: Optional[int] = None,
) -> List[T]:
    if total < 1:
        raise ValueError(f"trials must be positive, not {total}")
    batch_size = batch_size or context.get_setting("batch_size")
    workers = workers or context.get_setting("workers")

    def run(batch):
        index, size = batch
        logger.debug("Batch %d: %d trials", index, size)
        return work(make_rng(derive_seed(seed, index)), size)

    with ThreadPoolExecutor(workers, thread_name_prefix="ran-trials-") as pool:
        return list(pool.map(run, batches(total, batch_size)))


# Waiting time


@dataclass(frozen=True)
class SurvivalCurve:
    exact: Dict[int, Fraction]
    empirical: Dict[int, Tuple[int, int]]
    cutoff: int
    censored_mean: float

    @property
    def trials(self) -> int:
        return self.empirical[0][1]

    def frequency(self, t: int) -> float:
        survivors, trials = self.empirical[t]
        return survivors / trials

    def z_score(self, t: int) -> float:
        p = float(self.exact[t])
        survivors, trials = self.empirical[t]
        sigma = math.sqrt(trials * p * (1 - p))
        if sigma == 0:
            return 0.0 if survivors == trials * p else math.inf
        return (survivors - trials * p) / sigma

    def rows(self):
        for t in range(self.cutoff + 1):
            exact = self.exact[t]
            yield t, exact.numerator, exact.denominator, self.frequency(t)


def waiting_survival_exact(t: int) -> Fraction:
    """``P(X > t) = 3 / (2t + 3)``."""
    if t < 0:
        raise ValueError(f"t must be non-negative, not {t}")
    return Fraction(3, 2 * t + 3)


def _waiting_batch(cutoff: int):
    def work(rng: np.random.Generator, size: int) -> np.ndarray:
        survivors = np.zeros(cutoff + 1, dtype=np.int64)
        survivors[0] = alive = size
        for j in range(1, cutoff + 1):
            if not alive:
                break
            faces = WAITING_START_FACES + 2 * (j - 1)
            picks = rng.integers(0, faces, size=alive)
            alive = int(np.count_nonzero(picks >= WAITING_TARGETS))
            survivors[j] = alive
        return survivors

    return work


def waiting_time_trials(
    trials: int,
    cutoff: int,
    seed: int,
    batch_size: Optional[int] = None,
    workers: Optional[int] = None,
) -> SurvivalCurve:
    """Steps until one of two marked faces is subdivided, censored at ``cutoff``.

    Local time 0 has five active faces, two of them marked, and each step
    adds two more, so step ``j >= 1`` picks among ``2j + 3``.
    """
    if cutoff < 0:
        raise ValueError(f"cutoff must be non-negative, not {cutoff}")
    parts = _run_batches(trials, seed, _waiting_batch(cutoff), batch_size, workers)
    survivors = np.sum(parts, axis=0)
    # min(X, c) = sum over j < c of [X > j]
    censored_mean = float(survivors[:cutoff].sum()) / trials
    logger.info(
        "Waiting time: %d trials, censored mean %.4f at cutoff %d",
        trials,
        censored_mean,
        cutoff,
    )
    return SurvivalCurve(
        exact={t: waiting_survival_exact(t) for t in range(cutoff + 1)},
        empirical={t: (int(survivors[t]), trials) for t in range(cutoff + 1)},
        cutoff=cutoff,
        censored_mean=censored_mean,
    )


# Degree moments


def rising_factorial(a: int, k: int, max_bits: int = RISING_FACTORIAL_MAX_BITS) -> int:
    """``a (a+1) ... (a+k-1)``; raises ``OverflowError`` past ``max_bits``."""
    if a < 0 or k < 0:
        raise ValueError(f"Rising factorial needs a, k >= 0, got ({a}, {k})")
    result = 1
    for i in range(k):
        result *= a + i
        if result.bit_length() > max_bits:
            raise OverflowError(
                f"Rising factorial ({a}, {k}) exceeds {max_bits} bits"
            )
    return result


def moment_bound(s: int, t: int, k: int) -> float:
    return math.factorial(k + 2) / 2 * (2 * t / s) ** (k / 2)


def exact_rising_moment(s: int, t: int, k: int) -> Fraction:
    """``E[d_t(s)^(k)]`` for the vertex inserted at step ``s >= 1``.

    A vertex of degree ``d`` lies on ``d`` of the ``2j - 1`` active faces, so
    each later step multiplies the moment by ``1 + k / (2j - 1)``.
    """
    if not 1 <= s <= t:
        raise ValueError(f"Need 1 <= s <= t, got s={s}, t={t}")
    moment = Fraction(rising_factorial(3, k))
    for j in range(s + 1, t + 1):
        moment *= 1 + Fraction(k, 2 * j - 1)
    return moment


@dataclass(frozen=True)
class MomentCheck:
    s: int
    t: int
    k: int
    trials: int
    estimate: float
    stderr: float
    bound: float
    exact: Fraction
    sigmas: float = 4.0

    @property
    def passed(self) -> bool:
        return self.estimate - self.sigmas * self.stderr <= self.bound


def moment_bound_check(
    s: int,
    t: int,
    k: int,
    trials: int,
    seed: int,
    sampler: FaceSampler = uniform_face_sampler,
    batch_size: Optional[int] = None,
    workers: Optional[int] = None,
) -> MomentCheck:
    if not 1 <= s <= t:
        raise ValueError(f"Need 1 <= s <= t, got s={s}, t={t}")
    if k < 1:
        raise ValueError(f"Moment order must be positive, not {k}")

    def work(rng, size):
        choices = sampler(rng, 1, t, size)
        degrees = kernels.degree_trials(choices, s + 3)
        return special.poch(degrees.astype(np.float64), k)

    values = np.concatenate(_run_batches(trials, seed, work, batch_size, workers))
    if not np.all(np.isfinite(values)):
        raise OverflowError(f"Rising factorial of order {k} overflows float64")
    check = MomentCheck(
        s=s,
        t=t,
        k=k,
        trials=trials,
        estimate=float(values.mean()),
        stderr=float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
        bound=moment_bound(s, t, k),
        exact=exact_rising_moment(s, t, k),
        sigmas=context.get_setting("sigmas"),
    )
    logger.info(
        "Moment s=%d t=%d k=%d: %.4f +- %.4f (exact %.4f, bound %.4f)",
        s,
        t,
        k,
        check.estimate,
        check.stderr,
        float(check.exact),
        check.bound,
    )
    return check


# Exhaustive enumeration


class Outcome(NamedTuple):
    choices: Tuple[int, ...]
    probability: Fraction
    label_degrees: Tuple[int, ...]
    depths: Tuple[Tuple[int, int], ...]
    diameter: int

    @property
    def degrees(self) -> Tuple[int, ...]:
        return tuple(sorted(self.label_degrees, reverse=True))


MARGINAL_FIELDS = ("degrees", "depths", "diameter")


@dataclass(frozen=True)
class EnumerationTable:
    t: int
    outcomes: Tuple[Outcome, ...]

    @property
    def total_probability(self) -> Fraction:
        return sum((o.probability for o in self.outcomes), Fraction(0))

    def marginal(self, field: str) -> Dict:
        if field not in MARGINAL_FIELDS:
            raise ValueError(f"Unknown marginal {field!r}, pick one of {MARGINAL_FIELDS}")
        result: Dict = {}
        for outcome in self.outcomes:
            key = getattr(outcome, field)
            result[key] = result.get(key, Fraction(0)) + outcome.probability
        return result

    def expected_degree_moment(self, label: int, k: int) -> Fraction:
        return sum(
            (
                o.probability * rising_factorial(o.label_degrees[label - 1], k)
                for o in self.outcomes
            ),
            Fraction(0),
        )

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "outcomes": [
                {
                    "choices": list(o.choices),
                    "probability": str(o.probability),
                    "degrees": list(o.label_degrees),
                    "depths": {str(k): c for k, c in o.depths},
                    "diameter": o.diameter,
                }
                for o in self.outcomes
            ],
        }


def _radices(t: int) -> List[int]:
    return [2 * j - 1 for j in range(1, t + 1)]


def enumerate_small(t: int) -> EnumerationTable:
    """Every face-choice sequence of ``t`` steps, in lexicographic order."""
    if not 0 <= t <= ENUMERATION_MAX_T:
        raise ValueError(f"Enumeration supports 0 <= t <= {ENUMERATION_MAX_T}, not {t}")
    radices = _radices(t)
    probability = Fraction(1, math.prod(radices))
    outcomes = []
    for choices in itertools.product(*(range(r) for r in radices)):
        process = RanProcess(t)
        process.run(np.array(choices, dtype=np.int64))
        generation = process.snapshot()
        outcomes.append(
            Outcome(
                choices=choices,
                probability=probability,
                label_degrees=tuple(int(d) for d in generation.graph.degrees),
                depths=tuple(sorted(face_depth_histogram(generation.genealogy).items())),
                diameter=diameter_exact(generation.graph, max_vertices=generation.graph.n),
            )
        )
    logger.debug("Enumerated %d outcomes for t=%d", len(outcomes), t)
    return EnumerationTable(t=t, outcomes=tuple(outcomes))


def monte_carlo_marginals(
    t: int,
    trials: int,
    seed: int,
    sampler: FaceSampler = uniform_face_sampler,
    batch_size: Optional[int] = None,
    workers: Optional[int] = None,
) -> np.ndarray:
    """Count how often each choice sequence is drawn.

    Sequences are indexed as mixed-radix numbers with the last step varying
    fastest, the order ``enumerate_small`` lists them in.
    """
    if not 0 <= t <= ENUMERATION_MAX_T:
        raise ValueError(f"Enumeration supports 0 <= t <= {ENUMERATION_MAX_T}, not {t}")
    radices = _radices(t)
    weights = np.ones(t, dtype=np.int64)
    for i in range(t - 2, -1, -1):
        weights[i] = weights[i + 1] * radices[i + 1]
    outcome_count = math.prod(radices)

    def work(rng, size):
        index = sampler(rng, 1, t, size) @ weights
        return np.bincount(index, minlength=outcome_count)

    return np.sum(_run_batches(trials, seed, work, batch_size, workers), axis=0)


class MarginalCell(NamedTuple):
    field: str
    value: object
    probability: Fraction
    observed: int
    trials: int
    z: float
    passed: bool


def compare_marginals(
    table: EnumerationTable, counts: np.ndarray, sigmas: Optional[float] = None
) -> List[MarginalCell]:
    """Binomial z-test of Monte Carlo class frequencies against the exact marginals."""
    sigmas = context.get_setting("sigmas") if sigmas is None else sigmas
    trials = int(counts.sum())
    cells = []
    for field in MARGINAL_FIELDS:
        observed: Dict = {}
        for outcome, count in zip(table.outcomes, counts):
            key = getattr(outcome, field)
            observed[key] = observed.get(key, 0) + int(count)
        for value, probability in table.marginal(field).items():
            p = float(probability)
            expected = trials * p
            sigma = math.sqrt(trials * p * (1 - p))
            deviation = observed[value] - expected
            if sigma == 0:
                z = 0.0 if deviation == 0 else math.inf
            else:
                z = deviation / sigma
            cells.append(
                MarginalCell(
                    field=field,
                    value=value,
                    probability=probability,
                    observed=observed[value],
                    trials=trials,
                    z=z,
                    passed=abs(z) <= sigmas,
                )
            )
    return cells


# Depth counts


@dataclass(frozen=True, eq=False)
class DepthSample:
    """Per-depth Monte Carlo means; index ``k`` is depth ``k``."""

    trials: int
    mean: np.ndarray
    stderr: np.ndarray

    def z_scores(self, expected: Dict[int, float]) -> Dict[int, float]:
        scores = {}
        for k in range(1, self.mean.shape[0]):
            e = expected.get(k, 0.0)
            if self.stderr[k] == 0:
                scores[k] = 0.0 if abs(self.mean[k] - e) < 1e-9 else math.inf
            else:
                scores[k] = (self.mean[k] - e) / self.stderr[k]
        return scores


def depth_counts_trials(
    t: int,
    trials: int,
    seed: int,
    sampler: FaceSampler = uniform_face_sampler,
    batch_size: Optional[int] = None,
    workers: Optional[int] = None,
) -> DepthSample:
    if t < 0:
        raise ValueError(f"t must be non-negative, not {t}")

    def work(rng, size):
        counts = kernels.depth_count_trials(sampler(rng, 1, t, size))
        return counts.sum(axis=0), (counts * counts).sum(axis=0)

    parts = _run_batches(trials, seed, work, batch_size, workers)
    sums = np.sum([p[0] for p in parts], axis=0)
    squares = np.sum([p[1] for p in parts], axis=0)
    mean = sums / trials
    if trials > 1:
        variance = np.maximum(squares - trials * mean**2, 0.0) / (trials - 1)
    else:
        variance = np.zeros_like(mean)
    return DepthSample(trials=trials, mean=mean, stderr=np.sqrt(variance / trials))
