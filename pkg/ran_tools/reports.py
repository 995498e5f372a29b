"""Report records and their JSON / CSV renderings.

JSON documents carry ``"schema": 1``; fields are only ever added.
"""

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Optional, Sequence

from ran_tools.generator import Generation
from ran_tools.helpers import elapsed_ms
from ran_tools.spectra import DegreeReport, SpectralReport, degree_report, top_k_eigenvalues
from ran_tools.stochastics import EnumerationTable, SurvivalCurve
from ran_tools.tree_metrics import (
    Constants,
    DepthProfile,
    DiameterResult,
    depth_profile,
    diameter,
    solve_eta_rho,
    tree_height,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass
class StatsReport:
    t: int
    seed: int
    counts: Dict[str, int]
    degrees: DegreeReport
    depth: DepthProfile
    diameter: DiameterResult
    constants: Constants
    spectral: Optional[SpectralReport] = None
    timing: Dict[str, float] = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        t = self.t
        return self.counts == {"n": t + 3, "m": 3 * t + 3, "faces": 2 * t + 1}

    def to_dict(self, with_timing: bool = True) -> dict:
        doc = {
            "schema": SCHEMA_VERSION,
            "t": self.t,
            "seed": self.seed,
            "valid": self.valid,
            "counts": dict(self.counts),
            "top_k": [
                {"label": v.label, "degree": v.degree} for v in self.degrees.top_k
            ],
            "alpha_hat": self.degrees.alpha_hat,
            "d_min": self.degrees.d_min,
            "lambdas": None,
            "ratios": None,
            "depth": {
                "k_star": self.depth.k_star,
                "mean_depth": self.depth.mean_depth,
                "expected_mean_depth": self.depth.expected_mean_depth,
                "tree_height": self.diameter.tree_height,
            },
            "diameter": diameter_to_dict(self.diameter),
            "constants": constants_to_dict(self.constants),
        }
        if self.spectral is not None:
            doc.update(spectral_to_dict(self.spectral))
        if with_timing:
            doc["timing"] = dict(self.timing)
        return doc


def spectral_to_dict(report: SpectralReport) -> dict:
    return {
        "lambdas": list(report.lambdas),
        "ratios": list(report.ratios),
        "solver": {
            "method": report.method,
            "tol": report.solver_tol,
            "iterations": list(report.iterations),
            "residuals": list(report.residuals),
        },
    }


def diameter_to_dict(result: DiameterResult) -> dict:
    return {
        "exact": result.exact,
        "lower": result.lower,
        "upper": result.upper,
        "method": result.method,
        "tree_height": result.tree_height,
    }


def constants_to_dict(constants: Constants) -> dict:
    return {
        "eta": constants.eta,
        "rho": constants.rho,
        "residual": constants.residual,
        "log": "ln",
    }


def collect_stats(
    generation: Generation,
    k: int,
    tol: Optional[float] = None,
    spectra: bool = True,
    d_min: Optional[int] = None,
    timing: Optional[Dict[str, float]] = None,
) -> StatsReport:
    graph, genealogy = generation.graph, generation.genealogy
    timing = dict(timing or {})
    with elapsed_ms(timing, "analyze_ms"):
        height = tree_height(genealogy)
        report = StatsReport(
            t=graph.t,
            seed=generation.config.seed,
            counts={"n": graph.n, "m": graph.m, "faces": generation.faces.count},
            degrees=degree_report(graph, k, d_min),
            depth=depth_profile(genealogy),
            diameter=diameter(graph, generation.config.seed, tree_height=height),
            constants=solve_eta_rho(),
            spectral=top_k_eigenvalues(graph, k, tol) if spectra else None,
        )
    report.timing = timing
    if not report.valid:
        logger.error("Count identities fail for t=%d: %s", report.t, report.counts)
    return report


def _json_default(value):
    if isinstance(value, Fraction):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _finite(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def histogram_csv(histogram: Dict[int, int]) -> str:
    return _csv(("degree", "count"), sorted(histogram.items()))


def depth_csv(profile: DepthProfile) -> str:
    return _csv(
        ("depth", "empirical", "expected"),
        ((k, e, repr(x)) for k, e, x in profile.rows()),
    )


def survival_csv(curve: SurvivalCurve) -> str:
    return _csv(
        ("t", "exact_num", "exact_den", "empirical"),
        ((t, num, den, repr(freq)) for t, num, den, freq in curve.rows()),
    )


def survival_to_dict(curve: SurvivalCurve) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "cutoff": curve.cutoff,
        "trials": curve.trials,
        "censored_mean": curve.censored_mean,
        "survival": [
            {
                "t": t,
                "exact": f"{num}/{den}",
                "survivors": curve.empirical[t][0],
                "empirical": freq,
                "z": _finite(curve.z_score(t)),
            }
            for t, num, den, freq in curve.rows()
        ],
    }


def depth_to_dict(profile: DepthProfile, t: int) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "t": t,
        "k_star": profile.k_star,
        "mean_depth": profile.mean_depth,
        "expected_mean_depth": profile.expected_mean_depth,
        "depths": [
            {"depth": k, "empirical": e, "expected": x} for k, e, x in profile.rows()
        ],
    }


def enumeration_to_dict(table: EnumerationTable) -> dict:
    doc = table.to_json()
    doc["schema"] = SCHEMA_VERSION
    return doc
