"""Extremum Seeking Tracking: derivative-free distributed optimization by dithered cost measurements."""

from .algorithm import AgentState, AlgorithmParams, Kind, OutboundMessage, esgt_init, esgt_round, gt_init, gt_round, run
from .diagnostics import ConsensusBasis, RoundMetrics, RunRecord, build_basis, measure, reconstruct, split
from .dither import DitherConfig, common_period, design_dither, paper_recipe_periods
from .estimator import GradientEstimate, es_gradient, estimate_error_curve
from .graph import WeightedGraph, erdos_renyi_connected, metropolis_weights, validate_doubly_stochastic
from .problem import (
    LocalCost,
    Problem,
    personalized_instance,
    quadratic_instance,
    solve_centralized,
    source_seeking_instance,
)

__version__ = "0.1.0"
