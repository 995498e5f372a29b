import argparse
import io
import logging
import sys
from contextlib import redirect_stderr, redirect_stdout
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, TextIO, Tuple, Union

from ran_tools import __version__, config, context
from ran_tools.cache import GenerationCache
from ran_tools.errors import ExportError, RanError
from ran_tools.generator import GeneratorConfig
from ran_tools.helpers import elapsed_ms
from ran_tools.reports import (
    SCHEMA_VERSION,
    collect_stats,
    constants_to_dict,
    depth_csv,
    depth_to_dict,
    diameter_to_dict,
    dump_json,
    histogram_csv,
    spectral_to_dict,
    survival_csv,
    survival_to_dict,
)
from ran_tools.serializers import export_edges, write_snapshot
from ran_tools.spectra import degree_window, eigen_ratio_report
from ran_tools.stochastics import waiting_time_trials
from ran_tools.tree_metrics import (
    depth_profile,
    diameter,
    height_diagnostic,
    solve_eta_rho,
    tree_height,
    typical_distance,
)
from ran_tools.verify import DEFAULT_T_LIST, verify

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

SUBCOMMANDS = (
    "generate",
    "stats",
    "eigen",
    "diameter",
    "depth",
    "waiting",
    "constants",
    "verify",
)
FORMATS = ("edgelist", "json", "csv", "binary")
# Subcommands that draw random numbers refuse to run without a seed.
NEEDS_SEED = frozenset(SUBCOMMANDS) - {"constants"}
ALLOWED_FORMATS = {
    "generate": FORMATS,
    "stats": ("json", "csv"),
    "eigen": ("json",),
    "diameter": ("json",),
    "depth": ("json", "csv"),
    "waiting": ("json", "csv"),
    "constants": ("json",),
    "verify": ("json",),
}
STATS_D_MIN = 10

Artifact = Union[str, bytes]


class UsageError(Exception):
    pass


@dataclass
class RunSpec:
    subcommand: str
    t: Optional[int] = None
    seed: Optional[int] = None
    k: Optional[int] = None
    trials: Optional[int] = None
    format: Optional[str] = None
    output: Optional[str] = None
    cutoff: int = 20
    tol: Optional[float] = None
    pairs: Optional[int] = None
    t_list: List[int] = field(default_factory=list)
    seed_list: List[int] = field(default_factory=list)
    spectra: bool = True

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunSpec":
        t, seed = args.t, args.seed
        t_list, seed_list = [], []
        if args.subcommand == "verify":
            t_list, seed_list = list(t or DEFAULT_T_LIST), list(seed or [])
            t, seed = None, (seed[0] if seed else None)
        else:
            if t is not None and len(t) != 1:
                raise UsageError(f"{args.subcommand} takes a single --t")
            if seed is not None and len(seed) != 1:
                raise UsageError(f"{args.subcommand} takes a single --seed")
            t = t[0] if t else None
            seed = seed[0] if seed else None
        return cls(
            subcommand=args.subcommand,
            t=t,
            seed=seed,
            k=args.k,
            trials=args.trials,
            format=args.format,
            output=args.output,
            cutoff=args.cutoff,
            tol=args.tol,
            pairs=args.pairs,
            t_list=t_list,
            seed_list=seed_list,
            spectra=not args.no_spectra,
        )

    def validate(self):
        if self.subcommand in NEEDS_SEED and self.seed is None:
            raise UsageError(f"{self.subcommand} needs --seed")
        needs_t = self.subcommand not in ("waiting", "constants", "verify")
        if needs_t and self.t is None:
            raise UsageError(f"{self.subcommand} needs --t")
        if self.format is not None and self.format not in ALLOWED_FORMATS[self.subcommand]:
            raise UsageError(
                f"{self.subcommand} writes {', '.join(ALLOWED_FORMATS[self.subcommand])}, "
                f"not {self.format}"
            )
        for name in ("t", "k", "trials", "pairs"):
            value = getattr(self, name)
            if value is not None and value < (0 if name == "t" else 1):
                raise UsageError(f"--{name} must be positive, not {value}")
        if self.k is not None and self.t is not None and self.k > self.t + 3:
            raise UsageError(
                f"--k {self.k} exceeds the {self.t + 3} vertices at t={self.t}"
            )
        if self.cutoff < 0:
            raise UsageError(f"--cutoff must be non-negative, not {self.cutoff}")
        if self.tol is not None and self.tol <= 0:
            raise UsageError(f"--tol must be positive, not {self.tol}")

    @property
    def resolved_format(self) -> str:
        if self.format:
            return self.format
        return "table" if self.subcommand == "verify" else "json"


def _non_negative_int(value: str) -> int:
    result = int(value)
    if result < 0:
        raise argparse.ArgumentTypeError(f"{value} is negative")
    return result


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--t", type=_non_negative_int, nargs="+", metavar="T")
    common.add_argument("--seed", type=_non_negative_int, nargs="+", metavar="SEED")
    common.add_argument("--k", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--cutoff", type=int, default=20)
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--output", metavar="PATH", help="default: stdout")
    common.add_argument("--tol", type=float)
    common.add_argument("--pairs", type=int)
    common.add_argument("--no-spectra", action="store_true")
    common.add_argument("--config", action="append", default=[], metavar="PATH")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="ran-tools",
        description="Generate Random Apollonian Networks and check their laws.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        subparsers.add_parser(name, parents=[common])
    return parser


def _setup_logging(verbose: int, stream: TextIO):
    level = logging.DEBUG if verbose else context.get_setting("log_level")
    handler = logging.StreamHandler(stream)
    handler.setFormatter(logging.Formatter("%(levelname)-8s %(name)s: %(message)s"))
    root = logging.getLogger()
    for existing in list(root.handlers):
        if getattr(existing, "_ran_tools", False):
            root.removeHandler(existing)
    handler._ran_tools = True
    root.addHandler(handler)
    root.setLevel(level)


def _generation(spec: RunSpec, timing: dict, cache: GenerationCache):
    with elapsed_ms(timing, "generate_ms"):
        return cache(GeneratorConfig(t_max=spec.t, seed=spec.seed))


def _default_k(spec: RunSpec) -> int:
    return spec.k or context.get_setting("default_k")


def _run_generate(spec: RunSpec, cache) -> Tuple[Artifact, int]:
    generation = _generation(spec, {}, cache)
    graph = generation.graph
    fmt = spec.resolved_format
    if fmt == "binary":
        buffer = io.BytesIO()
        write_snapshot(graph, spec.seed, buffer)
        return buffer.getvalue(), EXIT_OK
    if fmt == "edgelist":
        buffer = io.BytesIO()
        export_edges(graph, buffer)
        return buffer.getvalue(), EXIT_OK
    if fmt == "csv":
        lines = ["u,v"] + [f"{u},{v}" for u, v in graph.edges]
        return "\n".join(lines) + "\n", EXIT_OK
    return (
        dump_json(
            {
                "schema": SCHEMA_VERSION,
                "t": graph.t,
                "seed": spec.seed,
                "counts": {"n": graph.n, "m": graph.m, "faces": generation.faces.count},
                "edges": graph.edges.tolist(),
            }
        ),
        EXIT_OK,
    )


def _run_stats(spec: RunSpec, cache) -> Tuple[Artifact, int]:
    timing = {}
    generation = _generation(spec, timing, cache)
    report = collect_stats(
        generation,
        _default_k(spec),
        spec.tol,
        spectra=spec.spectra,
        d_min=STATS_D_MIN,
        timing=timing,
    )
    if spec.resolved_format == "csv":
        return histogram_csv(report.degrees.histogram), EXIT_OK
    doc = report.to_dict()
    if generation.graph.t >= 2:
        window = degree_window(generation.graph, _default_k(spec))
        doc["degree_window"] = {
            "f": "ln t",
            "lower": window.lower,
            "upper": window.upper,
            "max_in_window": window.max_in_window,
            "gaps": list(window.gaps),
            "gaps_ok": list(window.gaps_ok),
        }
    return dump_json(doc), EXIT_OK


def _run_eigen(spec: RunSpec, cache) -> Tuple[Artifact, int]:
    timing = {}
    generation = _generation(spec, timing, cache)
    graph = generation.graph
    with elapsed_ms(timing, "analyze_ms"):
        report = eigen_ratio_report(graph, _default_k(spec), spec.tol)
    doc = {
        "schema": SCHEMA_VERSION,
        "t": graph.t,
        "seed": spec.seed,
        "top_k": list(report.top_degrees),
        "h_lambda1": report.h_lambda1,
        "h_ratio": report.h_ratio,
        "f_lambda1": report.f_lambda1,
        "s3_prime_size": report.s3_prime_size,
        "s3_prime_bound": report.s3_prime_bound,
        "timing": timing,
    }
    doc.update(spectral_to_dict(report.spectral))
    return dump_json(doc), EXIT_OK


def _run_diameter(spec: RunSpec, cache) -> Tuple[Artifact, int]:
    timing = {}
    generation = _generation(spec, timing, cache)
    graph = generation.graph
    with elapsed_ms(timing, "analyze_ms"):
        height = tree_height(generation.genealogy)
        result = diameter(graph, spec.seed, tree_height=height)
        doc = {
            "schema": SCHEMA_VERSION,
            "t": graph.t,
            "seed": spec.seed,
            "diameter": diameter_to_dict(result),
        }
        if graph.t >= 2:
            doc["height"] = height_diagnostic(height, graph.t)
            if spec.pairs:
                sample = typical_distance(graph, spec.pairs, spec.seed)
                doc["typical_distance"] = {
                    "mean": sample.mean,
                    "std": sample.std,
                    "ratio_ln_n": sample.ratio,
                    "pairs": sample.pair_count,
                    "limit": sample.limit,
                }
    doc["timing"] = timing
    return dump_json(doc), EXIT_OK


def _run_depth(spec: RunSpec, cache) -> Tuple[Artifact, int]:
    generation = _generation(spec, {}, cache)
    profile = depth_profile(generation.genealogy)
    if spec.resolved_format == "csv":
        return depth_csv(profile), EXIT_OK
    return dump_json(depth_to_dict(profile, generation.graph.t)), EXIT_OK


def _run_waiting(spec: RunSpec, cache) -> Tuple[Artifact, int]:
    trials = spec.trials or context.get_setting("default_trials")
    curve = waiting_time_trials(trials, spec.cutoff, spec.seed)
    if spec.resolved_format == "csv":
        return survival_csv(curve), EXIT_OK
    doc = survival_to_dict(curve)
    doc["seed"] = spec.seed
    return dump_json(doc), EXIT_OK


def _run_constants(spec: RunSpec, cache) -> Tuple[Artifact, int]:
    doc = constants_to_dict(solve_eta_rho())
    doc["schema"] = SCHEMA_VERSION
    return dump_json(doc), EXIT_OK


def _run_verify(spec: RunSpec, cache) -> Tuple[Artifact, int]:
    run = verify(spec.t_list, spec.seed_list, trials=spec.trials, cache=cache)
    code = EXIT_OK if run.passed else EXIT_FAILURE
    if spec.resolved_format == "json":
        doc = {
            "schema": SCHEMA_VERSION,
            "passed": run.passed,
            "checks": [r._asdict() for r in run.results],
        }
        return dump_json(doc), code
    return run.table() + "\n", code


HANDLERS = {
    "generate": _run_generate,
    "stats": _run_stats,
    "eigen": _run_eigen,
    "diameter": _run_diameter,
    "depth": _run_depth,
    "waiting": _run_waiting,
    "constants": _run_constants,
    "verify": _run_verify,
}


def _emit(artifact: Artifact, output: Optional[str], stdout: TextIO):
    if output in (None, "-"):
        if isinstance(artifact, bytes):
            target = getattr(stdout, "buffer", None)
            if target is None:
                stdout.write(artifact.decode("latin-1"))
            else:
                target.write(artifact)
                target.flush()
        else:
            stdout.write(artifact)
        return
    try:
        mode = "wb" if isinstance(artifact, bytes) else "w"
        with open(output, mode) as f:
            f.write(artifact)
    except OSError as e:
        raise ExportError(f"Could not write {output}: {e}") from e


def run_cli(
    argv: Optional[Sequence[str]] = None,
    stdout: Optional[TextIO] = None,
    stderr: Optional[TextIO] = None,
) -> int:
    """Run one invocation and return its exit code.

    0 on success, 1 on a failed verification or a runtime error, 2 on a
    usage error.
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        with redirect_stdout(stdout), redirect_stderr(stderr):
            args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        context.set_config(config.load(args.config))
    except (OSError, config.ConfigError) as e:
        stderr.write(f"ran-tools: error: {e}\n")
        return EXIT_USAGE
    _setup_logging(args.verbose, stderr)

    try:
        spec = RunSpec.from_args(args)
        spec.validate()
    except UsageError as e:
        parser.print_usage(stderr)
        stderr.write(f"ran-tools: error: {e}\n")
        return EXIT_USAGE

    logger.debug("Running %s", spec)
    try:
        artifact, code = HANDLERS[spec.subcommand](spec, GenerationCache())
        _emit(artifact, spec.output, stdout)
    except RanError as e:
        stderr.write(f"ran-tools: {e}\n")
        return EXIT_FAILURE
    except ValueError as e:
        stderr.write(f"ran-tools: error: {e}\n")
        return EXIT_USAGE
    return code


def main():
    sys.exit(run_cli())
