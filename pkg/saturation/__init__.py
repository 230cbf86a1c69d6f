"""
Saturation Attack Module

Simulates, optimizes and rates detector-saturation attacks on Gaussian-modulated
coherent-state CV-QKD.
"""

__version__ = "1.0.0"

from .attack import AttackParams, Strategy, attack_run, saturation_profile
from .config import ExperimentConfig, load_config, paper_defaults
from .estimation import ChannelEstimate, analytic_estimates, block_estimates
from .optimizer import AttackSolution, SuccessConditions, distance_sweep, feasibility_boundary, optimize_attack
from .protocol import ProtocolParams, distance_to_transmittance
from .rating import FactorLevels, RatingSheet, rate, rate_catalog
from .security import SecurityParams, key_rate, null_key_threshold
from .snu import DetectorLimits, GaussianSpec, clipped_covariance, clipped_moments

__all__ = [
    "AttackParams",
    "Strategy",
    "attack_run",
    "saturation_profile",
    "ExperimentConfig",
    "load_config",
    "paper_defaults",
    "ChannelEstimate",
    "analytic_estimates",
    "block_estimates",
    "AttackSolution",
    "SuccessConditions",
    "distance_sweep",
    "feasibility_boundary",
    "optimize_attack",
    "ProtocolParams",
    "distance_to_transmittance",
    "FactorLevels",
    "RatingSheet",
    "rate",
    "rate_catalog",
    "SecurityParams",
    "key_rate",
    "null_key_threshold",
    "DetectorLimits",
    "GaussianSpec",
    "clipped_covariance",
    "clipped_moments",
]
