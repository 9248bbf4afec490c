"""Languid particle dynamics (LPD) for particle swarm optimization.

Modules
-------
swarm
    Particle state, topologies and the shared velocity/position kernel,
    including the languid inertia policy.
variants
    LDIW, TVAC, C-PSO, DMS-PSO and CL-PSO as hook bundles over the kernel.
benchfuncs
    CEC-2014-style suite of 30 shifted/rotated test functions.
stats
    Error and alpha metrics, Shapiro-Wilk, Welch t-test, Wilcoxon rank-sum.
harness
    Plans, grid expansion, seeded (parallel) execution and records.
cli
    ``languidpso run|report|hist|suite``.
"""

from .benchfuncs import BenchmarkFunction, build_suite
from .stats import alpha_rating, compare_pair, mean_error, summarize_comparisons
from .swarm import LANGUID, STANDARD, InertiaPolicy
from .variants import VARIANTS, VariantSpec, optimize, optimize_many

__version__ = "0.1.0"

__all__ = [
    "BenchmarkFunction",
    "InertiaPolicy",
    "LANGUID",
    "STANDARD",
    "VARIANTS",
    "VariantSpec",
    "alpha_rating",
    "build_suite",
    "compare_pair",
    "mean_error",
    "optimize",
    "optimize_many",
    "summarize_comparisons",
]
