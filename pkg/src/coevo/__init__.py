"""Coevolutionary action-opinion dynamics on two-layer networks."""

from .analysis import (
    check_theorem2,
    check_theorem3,
    is_nash,
    nash_violations,
    opinion_equilibrium,
    polarization_partition,
)
from .dynamics import Scheduler, min_flip_gain, potential, potential_quadratic, run
from .game import GameParams, SystemState, best_response, delta, payoff
from .netgraph import LayerMatrix, Partition, TwoLayerNetwork, metropolis_weights, validate_layer

__version__ = "0.1.0"
