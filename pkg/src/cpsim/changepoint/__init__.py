"""Reversible-jump MCMC change point detection on piecewise-stationary series."""

from .config import SamplerConfig
from .moves import (
    ChainState,
    PiecewiseModel,
    birth_jacobian,
    birth_log_ratio,
    birth_move,
    count_move_prob,
    death_move,
    local_kernel,
    merge_tau2,
    propose_segment_count,
    relocation_prob,
    split_tau2,
    within_move,
)
from .sampler import (
    Posterior,
    PosteriorRecord,
    modal_changepoint_set,
    run_chain,
    standardize,
)
from .whittle import log_whittle_likelihood

__all__ = [
    "ChainState",
    "PiecewiseModel",
    "Posterior",
    "PosteriorRecord",
    "SamplerConfig",
    "birth_jacobian",
    "birth_log_ratio",
    "birth_move",
    "count_move_prob",
    "death_move",
    "local_kernel",
    "log_whittle_likelihood",
    "merge_tau2",
    "modal_changepoint_set",
    "propose_segment_count",
    "relocation_prob",
    "run_chain",
    "split_tau2",
    "standardize",
    "within_move",
]
