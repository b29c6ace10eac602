"""Exact moments of k-hop path counts in the Poisson random-connection model.

The analytic side enumerates non-flat partitions of the moment grid, turns
each into a Gaussian-kernel graph integral and evaluates it exactly; the
simulation side samples the random graph directly for cross-checks.
"""

__version__ = "0.1.0"

from ._backend import ACTIVE as _ACTIVE
from .gaussian import (ClosedForm, ClosedFormTerm, DivergentIntegralError, HopGraph, ModelParams,
                       cf_add, cf_eval, cf_mul, chain_kernel, eliminate_by_merges,
                       hop_graph_of_partition, integrate_gaussian_graph, pairwise_gaussian_merge)
from .moments import (MomentQuery, evaluate_query, khop_mean, khop_moment, khop_variance,
                      twohop_moment_stirling)
from .partitions import (LimitExceededError, Partition, enumerate_nonflat, nonflat_count,
                         stirling2, zeta)
from .simulate import SimConfig, SimResult, run_simulation, truncation_margin

BACKEND = _ACTIVE.name

__all__ = [
    "BACKEND", "ClosedForm", "ClosedFormTerm", "DivergentIntegralError", "HopGraph",
    "LimitExceededError", "ModelParams", "MomentQuery", "Partition", "SimConfig", "SimResult",
    "cf_add", "cf_eval", "cf_mul", "chain_kernel", "eliminate_by_merges", "enumerate_nonflat",
    "evaluate_query", "hop_graph_of_partition", "integrate_gaussian_graph", "khop_mean",
    "khop_moment", "khop_variance", "nonflat_count", "pairwise_gaussian_merge",
    "run_simulation", "stirling2", "truncation_margin", "twohop_moment_stirling", "zeta",
]
