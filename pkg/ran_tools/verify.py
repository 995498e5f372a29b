"""The invariant battery behind ``ran-tools verify``.

Each check runs over every requested ``(t, seed)`` and Monte Carlo plan and
reports one row; a check fails if any instance fails.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from tabulate import tabulate

from ran_tools import context
from ran_tools.cache import GenerationCache
from ran_tools.errors import NotConverged
from ran_tools.generator import Generation, GeneratorConfig, RanGraph, generate
from ran_tools.rng import FaceSampler, derive_seed, make_rng, uniform_face_sampler
from ran_tools.spectra import edges_to_sparse, largest_eigenvalues, top_k_degrees
from ran_tools.stochastics import (
    compare_marginals,
    depth_counts_trials,
    enumerate_small,
    exact_rising_moment,
    moment_bound,
    moment_bound_check,
    monte_carlo_marginals,
    waiting_time_trials,
)
from ran_tools.tree_metrics import (
    depth_chain_bound,
    diameter,
    diameter_estimate,
    diameter_exact,
    expected_depth_profile,
    solve_eta_rho,
    tree_height,
)

logger = logging.getLogger(__name__)

DEFAULT_T_LIST = (0, 1, 2, 10, 100, 1000)
DEFAULT_SEEDS = (1, 2, 3, 4, 5)

ORACLE_MAX_T = 5
MOMENT_GRID = ((1, 5, 10), (50, 100), (1, 2, 3))
SURVIVAL_HORIZON = 20
CENSORING_CUTOFFS = (100, 1000, 10000)
DEPTH_MC_T = 50
DEPTH_BOUND_T = 1000
SPECTRAL_MAX_T = 100000
ETA_WINDOW = (3.2892, 3.2894)


@dataclass(frozen=True)
class TrialPlan:
    """Seed and trial counts shared by the Monte Carlo checks."""

    seed: int
    trials: int
    sigmas: float
    batch_size: Optional[int] = None
    workers: Optional[int] = None

    def child_seed(self, index: int) -> int:
        return derive_seed(self.seed, index)

    def kwargs(self) -> dict:
        return {"batch_size": self.batch_size, "workers": self.workers}


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


@dataclass
class VerifyRun:
    t_list: Sequence[int]
    seeds: Sequence[int]
    plan: TrialPlan
    sampler: FaceSampler = uniform_face_sampler
    cache: Optional[GenerationCache] = None
    results: List[CheckResult] = field(default_factory=list)

    def generation(self, t: int, seed: int) -> Generation:
        config = GeneratorConfig(t_max=t, seed=seed)
        if self.sampler is uniform_face_sampler and self.cache is not None:
            return self.cache(config)
        return generate(config, sampler=self.sampler)

    def instances(self):
        for t in self.t_list:
            for seed in self.seeds:
                yield t, seed, self.generation(t, seed)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def table(self) -> str:
        rows = [(r.name, "PASS" if r.passed else "FAIL", r.detail) for r in self.results]
        return tabulate(rows, headers=("check", "result", "detail"))


CheckFunction = Callable[[VerifyRun], Tuple[bool, str]]
CHECKS: List[Tuple[str, CheckFunction]] = []


def check(name: str):
    def register(function: CheckFunction) -> CheckFunction:
        CHECKS.append((name, function))
        return function

    return register


def _edge_codes(graph: RanGraph) -> np.ndarray:
    return np.sort(graph.edges[:, 0] * (graph.n + 1) + graph.edges[:, 1])


@check("counts")
def check_counts(run: VerifyRun):
    bad = []
    for t, seed, g in run.instances():
        graph = g.graph
        ok = (
            graph.n == t + 3
            and graph.m == 3 * t + 3
            and g.faces.count == 2 * t + 1
            and int(graph.degrees.sum()) == 6 * t + 6
            and graph.m == 3 * graph.n - 6
            and g.genealogy.internal_count == t
            and g.genealogy.leaf_count == 2 * t + 1
        )
        if not ok:
            bad.append((t, seed))
    return not bad, f"failing (t, seed): {bad}" if bad else "n=t+3, m=3t+3, F=2t+1"


@check("euler")
def check_euler(run: VerifyRun):
    bad = [
        (t, seed)
        for t, seed, g in run.instances()
        if g.graph.n - g.graph.m + (g.faces.count + 1) != 2
    ]
    return not bad, f"failing (t, seed): {bad}" if bad else "n - m + f = 2"


@check("face_adjacency")
def check_face_adjacency(run: VerifyRun):
    bad = []
    for t, seed, g in run.instances():
        codes = _edge_codes(g.graph)
        triples = g.faces.triples()
        for i, j in ((0, 1), (0, 2), (1, 2)):
            wanted = triples[:, i] * (g.graph.n + 1) + triples[:, j]
            if not np.all(np.isin(wanted, codes)):
                bad.append((t, seed))
                break
    return not bad, f"failing (t, seed): {bad}" if bad else "every active face is a triangle"


@check("step_invariants")
def check_step_invariants(run: VerifyRun):
    t = min(max(run.t_list), 200)
    try:
        for seed in run.seeds:
            generate(GeneratorConfig(t_max=t, seed=seed), debug=True, sampler=run.sampler)
    except AssertionError as e:
        return False, str(e)
    return True, f"checked after every step up to t={t}"


@check("uniform_sampling")
def check_uniform_sampling(run: VerifyRun):
    plan = run.plan
    rng = make_rng(plan.child_seed(0))
    picks = run.sampler(rng, 2, 1, plan.trials)[:, 0]
    counts = np.bincount(picks, minlength=3)[:3]
    p = 1 / 3
    sigma = math.sqrt(plan.trials * p * (1 - p))
    z = (counts - plan.trials * p) / sigma
    worst = float(np.abs(z).max())
    return worst <= plan.sigmas, f"3 faces at t=2, max |z|={worst:.2f}"


@check("oracle_equivalence")
def check_oracle_equivalence(run: VerifyRun):
    plan = run.plan
    failing = []
    for t in range(1, ORACLE_MAX_T + 1):
        table = enumerate_small(t)
        counts = monte_carlo_marginals(
            t, plan.trials, plan.child_seed(t), run.sampler, **plan.kwargs()
        )
        failing += [
            (t, c.field, c.value) for c in compare_marginals(table, counts, plan.sigmas)
            if not c.passed
        ]
    moment = enumerate_small(3).expected_degree_moment(4, 1)
    ok = not failing and moment == Fraction(24, 5)
    detail = f"t<={ORACLE_MAX_T}, E[d_3(4)]={moment}"
    if failing:
        detail += f", failing cells: {failing[:5]}"
    return ok, detail


@check("survival_law")
def check_survival(run: VerifyRun):
    plan = run.plan
    curve = waiting_time_trials(
        plan.trials, SURVIVAL_HORIZON, plan.child_seed(100), **plan.kwargs()
    )
    worst = max(abs(curve.z_score(t)) for t in range(1, SURVIVAL_HORIZON + 1))
    return worst <= plan.sigmas, f"t=1..{SURVIVAL_HORIZON}, max |z|={worst:.2f}"


@check("censored_mean_growth")
def check_censored_mean(run: VerifyRun):
    plan = run.plan
    means = [
        waiting_time_trials(
            plan.trials, cutoff, plan.child_seed(101), **plan.kwargs()
        ).censored_mean
        for cutoff in CENSORING_CUTOFFS
    ]
    ok = all(a < b for a, b in zip(means, means[1:]))
    return ok, ", ".join(f"{c}: {m:.3f}" for c, m in zip(CENSORING_CUTOFFS, means))


@check("moment_bound")
def check_moment_bound(run: VerifyRun):
    plan = run.plan
    failing = []
    for index, (s, t, k) in enumerate(itertools.product(*MOMENT_GRID)):
        result = moment_bound_check(
            s,
            t,
            k,
            plan.trials,
            plan.child_seed(1000 + index),
            run.sampler,
            **plan.kwargs(),
        )
        if not result.passed:
            failing.append((s, t, k))
    for t in range(1, 6):
        for s in range(1, t + 1):
            for k in range(1, 4):
                if exact_rising_moment(s, t, k) > moment_bound(s, t, k):
                    failing.append(("exact", s, t, k))
    return not failing, f"failing: {failing}" if failing else "Monte Carlo grid and exact s,t<=5"


@check("degree_order")
def check_degree_order(run: VerifyRun):
    bad = []
    for t, seed, g in run.instances():
        graph = g.graph
        k = min(3, graph.n)
        top = top_k_degrees(graph, k)
        oracle = sorted(
            ((int(d), v + 1) for v, d in enumerate(graph.degrees)),
            key=lambda x: (-x[0], x[1]),
        )[:k]
        if [(v.degree, v.label) for v in top] != oracle:
            bad.append((t, seed))
    return not bad, f"failing (t, seed): {bad}" if bad else "top-k matches a full sort"


@check("spectral_closed_forms")
def check_closed_forms(run: VerifyRun):
    tol = context.get_setting("eigen_tol")
    iterations = context.get_setting("eigen_max_iterations")
    errors = []
    for size in (3, 4):
        pairs = np.array(
            [(u, v) for u in range(1, size + 1) for v in range(u + 1, size + 1)]
        )
        lambdas, _, _, _ = largest_eigenvalues(
            edges_to_sparse(pairs, size), 1, tol, iterations
        )
        errors.append(abs(lambdas[0] - (size - 1)))
    worst = max(errors)
    return worst <= tol, f"K3, K4 max error {worst:.1e}"


@check("lambda_vs_degree")
def check_lambda_vs_degree(run: VerifyRun):
    tol = context.get_setting("eigen_tol")
    iterations = context.get_setting("eigen_max_iterations")
    bad = []
    for t, seed, g in run.instances():
        if t > SPECTRAL_MAX_T:
            continue
        graph = g.graph
        try:
            lambdas, _, _, _ = largest_eigenvalues(graph.to_sparse(), 1, tol, iterations)
        except NotConverged as e:
            bad.append((t, seed, str(e)))
            continue
        if lambdas[0] < math.sqrt(graph.max_degree) * (1 - tol):
            bad.append((t, seed))
    return not bad, f"failing: {bad}" if bad else "lambda_1 >= sqrt(Delta_1)"


@check("diameter_vs_height")
def check_diameter_vs_height(run: VerifyRun):
    bad = []
    for t, seed, g in run.instances():
        if t == 0:
            # A lone face has height 0 but the triangle has diameter 1.
            continue
        result = diameter(g.graph, seed, tree_height(g.genealogy))
        # Without the exact value only the lower bound is certain.
        if result.lower > 2 * result.tree_height:
            bad.append((t, seed))
    return not bad, f"failing (t, seed): {bad}" if bad else "d <= 2 * tree height"


@check("diameter_bounds")
def check_diameter_bounds(run: VerifyRun):
    cap = context.get_setting("exact_diameter_max_vertices")
    bad, checked = [], 0
    for t, seed, g in run.instances():
        if g.graph.n > min(cap, 1003):
            continue
        exact = diameter_exact(g.graph)
        estimate = diameter_estimate(g.graph, seed)
        checked += 1
        if not estimate.lower <= exact <= estimate.upper:
            bad.append((t, seed))
    return not bad, f"failing (t, seed): {bad}" if bad else f"{checked} instances"


@check("depth_recursion")
def check_depth_recursion(run: VerifyRun):
    plan = run.plan
    problems = []
    for t in sorted(set(run.t_list) | {DEPTH_MC_T, DEPTH_BOUND_T}):
        expected = expected_depth_profile(t)
        if abs(math.fsum(expected.values()) - (2 * t + 1)) > 1e-9:
            problems.append(f"sum at t={t}")
        if any(e > depth_chain_bound(t, k) * (1 + 1e-12) for k, e in expected.items()):
            problems.append(f"chain bound at t={t}")

    sample = depth_counts_trials(
        DEPTH_MC_T, plan.trials, plan.child_seed(200), run.sampler, **plan.kwargs()
    )
    scores = sample.z_scores(expected_depth_profile(DEPTH_MC_T))
    worst = max(abs(z) for z in scores.values())
    if worst > plan.sigmas:
        problems.append(f"Monte Carlo at t={DEPTH_MC_T}: max |z|={worst:.2f}")
    return not problems, "; ".join(problems) or f"max |z|={worst:.2f} at t={DEPTH_MC_T}"


@check("constants")
def check_constants(run: VerifyRun):
    constants = solve_eta_rho()
    ok = (
        constants.residual < 1e-12
        and ETA_WINDOW[0] < constants.eta < ETA_WINDOW[1]
        and constants.rho == 1 / constants.eta
    )
    return ok, f"eta={constants.eta:.10f}, residual={constants.residual:.1e}"


def verify(
    t_list: Sequence[int] = DEFAULT_T_LIST,
    seed_list: Sequence[int] = DEFAULT_SEEDS,
    trials: Optional[int] = None,
    sampler: FaceSampler = uniform_face_sampler,
    cache: Optional[GenerationCache] = None,
    only: Optional[Sequence[str]] = None,
) -> VerifyRun:
    """Run the battery; ``only`` restricts it to the named checks."""
    if not seed_list:
        raise ValueError("verify needs at least one seed")
    plan = TrialPlan(
        seed=seed_list[0],
        trials=trials or context.get_setting("default_trials"),
        sigmas=context.get_setting("sigmas"),
    )
    run = VerifyRun(
        t_list=list(t_list),
        seeds=list(seed_list),
        plan=plan,
        sampler=sampler,
        cache=cache if cache is not None else GenerationCache(),
    )
    known = {name for name, _ in CHECKS}
    unknown = set(only or ()) - known
    if unknown:
        raise ValueError(f"Unknown checks: {sorted(unknown)}")

    for name, function in CHECKS:
        if only and name not in only:
            continue
        passed, detail = function(run)
        logger.info("%s: %s (%s)", name, "pass" if passed else "FAIL", detail)
        run.results.append(CheckResult(name, passed, detail))
    return run

