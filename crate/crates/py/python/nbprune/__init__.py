"""Noise-robust data pruning: keep the examples whose neighborhoods are
confidently labeled."""

from ._nbprune import (
    Dataset,
    NeighborGraph,
    __version__,
    brute_force_optimum,
    compute_confidence,
    correlation_report,
    generate_synthetic,
    greedy,
    greedy_balanced,
    measure_expansion_separation,
    objective,
    relabel_proxy,
    select,
    tau_preset,
)

__all__ = [
    "Dataset",
    "NeighborGraph",
    "__version__",
    "brute_force_optimum",
    "compute_confidence",
    "correlation_report",
    "generate_synthetic",
    "greedy",
    "greedy_balanced",
    "measure_expansion_separation",
    "objective",
    "relabel_proxy",
    "select",
    "tau_preset",
]
