"""froglab: simulation and numerical verification of frog models on rooted
d-ary trees.

The package covers four interacting-random-walk processes (the classic,
non-backtracking, self-similar, and re-activated frog models), the
loop-erasure coupling between biased walks and the non-backtracking model,
the exact recursive polynomial families behind the visit generating
function's self-consistency operator, and statistical suites verifying every
closed-form identity, fixed-point equation, and inequality the construction
rests on, at desk scale.
"""

__version__ = "0.1.0"

from .params import AffineMap, ModelParams, QSTAR, alpha, c_map, critical_drift, pstar, rho
from .polynomials import MultiPoly, build_P, build_Q, eval_poly
from .gridfn import GridFunction
from .fixedpoint import (
    IterateTrace,
    VisitOperator,
    apply_binary_closed,
    check_operator_domination,
    check_vanishing,
    exact_dyadic_iterate,
)
from .frogsim import (
    SimBatch,
    SimConfig,
    VisitRecord,
    estimate_pgf,
    run_batch,
    simulate_fm,
    simulate_nbfm,
    simulate_rsfm,
    simulate_sfm,
)
from .stats import CheckReport, EstimateWithCI, hoeffding_halfwidth
from .walks import (
    PatternLaw,
    TreeVertex,
    WalkPath,
    loop_erase,
    nbfm_pattern_pmf,
    pattern_of,
    sample_biased_walk,
    sample_patterns,
    verify_series_identities,
)

__all__ = [
    "AffineMap",
    "CheckReport",
    "EstimateWithCI",
    "GridFunction",
    "IterateTrace",
    "ModelParams",
    "MultiPoly",
    "PatternLaw",
    "QSTAR",
    "SimBatch",
    "SimConfig",
    "TreeVertex",
    "VisitOperator",
    "VisitRecord",
    "WalkPath",
    "alpha",
    "apply_binary_closed",
    "build_P",
    "build_Q",
    "c_map",
    "check_operator_domination",
    "check_vanishing",
    "critical_drift",
    "estimate_pgf",
    "eval_poly",
    "exact_dyadic_iterate",
    "hoeffding_halfwidth",
    "loop_erase",
    "nbfm_pattern_pmf",
    "pattern_of",
    "pstar",
    "rho",
    "run_batch",
    "sample_biased_walk",
    "sample_patterns",
    "simulate_fm",
    "simulate_nbfm",
    "simulate_rsfm",
    "simulate_sfm",
    "verify_series_identities",
]
