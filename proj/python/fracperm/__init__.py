"""Exact and variational permanents of non-negative matrices."""

from ._fracperm import (
    FracpermError,
    bounds,
    engine_costs,
    free_energy,
    gamma_star,
    generate,
    log_permanent,
    max_weight_matching,
    pdet_exact,
    permanent,
    prune,
    sinkhorn,
    solve,
)

__all__ = [
    "FracpermError",
    "bounds",
    "engine_costs",
    "free_energy",
    "gamma_star",
    "generate",
    "log_permanent",
    "max_weight_matching",
    "pdet_exact",
    "permanent",
    "prune",
    "sinkhorn",
    "solve",
]
